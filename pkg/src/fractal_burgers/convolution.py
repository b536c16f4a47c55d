"""Fast convolution of grid samples against ``p(t, .)`` and its derivative (d = 1).

Input samples are zero-padded to ``2n`` points, so the transform works on a
period ``P = 4L``.  The exact multiplier ``exp(-t |xi|^alpha)`` (times ``i xi``
for the derivative) then convolves against the *periodised* kernel
``sum_m K(z + mP)``.  The periodic images sit at distance ``>= 2L`` where the
kernel is given to machine precision by its tail series, and

    sum_{m != 0} |z + mP|^(-s) = P^(-s) [zeta(s, 1 + z/P) + zeta(s, 1 - z/P)]

(Hurwitz zeta) sums them in closed form, so the image part is subtracted from
the multiplier.  Mass sitting outside the grid can be supplied as a tail model
on the :class:`Profile`.  A :class:`KernelTail` (a combination of kernels and
kernel derivatives) is convolved in closed form through the semigroup
property; any other callable is added by quadrature.

:func:`ray_integral` evaluates the radial integrals
``int_0^1 w(r) int K(1 - r^alpha, x - r y) G(y) dy dr`` that appear in the
self-similar Duhamel formula.  At each node the dilated integrand
``G(y/r)/r`` is resampled as exact cell averages of a spline of the
cumulative integral of ``G``, which conserves its mass for every ``r``.
"""

from __future__ import annotations

import threading
from collections import OrderedDict
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import zeta

from .errors import DomainError, WrapAroundError
from .grid import Grid1D, Profile
from .kernel import (KernelParams, density, gradient, radial_profile, second_derivative_1d,
                     tail_coefficients)

_IMAGE_TERMS = 40
_MULTIPLIER_CACHE = 160
_TAIL_NODES = 96


class ConvolutionPlan:
    """Frequencies and cached multipliers for one ``(alpha, grid)`` pair.

    Plans are shared between threads; the multiplier cache is guarded by a lock
    and cached arrays are never modified in place.
    """

    def __init__(self, alpha: float, grid: Grid1D):
        self.alpha = float(alpha)
        self.grid = grid
        self.size = 2 * grid.n
        self.period = 2.0 * self.size * grid.h / 2.0       # = 4L
        self.xi = 2.0 * np.pi * np.fft.rfftfreq(self.size, d=grid.h)
        j = np.arange(self.size)
        self.offsets = np.where(j < self.size // 2, j, j - self.size) * grid.h
        self._cache: OrderedDict = OrderedDict()
        self._spectra: dict[int, list[np.ndarray]] = {}
        self._lock = threading.Lock()
        # images are evaluated at rho >= 2L t^(-1/alpha); the tail series must be exact there
        self.rho_tail = max(radial_profile(self.alpha, 1).rho_asymptotic,
                            radial_profile(self.alpha, 3).rho_asymptotic)

    def max_time(self) -> float:
        """Largest ``t`` for which the image correction is exact."""
        return (2.0 * self.grid.L / self.rho_tail) ** self.alpha

    def _image_spectra(self, order: int, count: int) -> list[np.ndarray]:
        """``h * rfft`` of the t-independent image sums, one per tail-series term."""
        with self._lock:
            spectra = self._spectra.setdefault(order, [])
            P, a = self.period, self.alpha
            z = self.offsets / P
            while len(spectra) < count:
                s = 1.0 + (len(spectra) + 1) * a
                if order == 0:
                    img = P ** (-s) * (zeta(s, 1.0 + z) + zeta(s, 1.0 - z))
                else:
                    img = -s * P ** (-s - 1.0) * (zeta(s + 1.0, 1.0 + z) - zeta(s + 1.0, 1.0 - z))
                spectra.append(self.grid.h * np.fft.rfft(img))
            return spectra[:count]

    def image_correction(self, t: float, order: int) -> np.ndarray:
        """Transform of ``sum_{m != 0} K(t, z + mP)`` sampled at the circular offsets."""
        coeffs = tail_coefficients(self.alpha, _IMAGE_TERMS)
        k = np.arange(1, _IMAGE_TERMS + 1)
        # terms below 1e-18 of the leading one at the closest image distance P/2 are dropped
        scale = np.abs(coeffs) * t ** k * (self.period / 2.0) ** (-k * self.alpha)
        count = int(np.nonzero(scale > 1e-18 * scale[0])[0][-1]) + 1
        spectra = self._image_spectra(order, count)
        return sum(A * t ** kk * spec for A, kk, spec in zip(coeffs, k, spectra))

    def multiplier(self, t: float, order: int = 0) -> np.ndarray:
        """Transform of ``p(t, .)`` (order 0) or ``p'(t, .)`` (order 1), images removed."""
        if order not in (0, 1):
            raise DomainError("only the kernel (order 0) and its derivative (order 1) are supported")
        t = float(t)
        if not t > 0:
            raise DomainError("time t must be positive")
        if t > self.max_time():
            raise WrapAroundError(
                f"kernel width t^(1/alpha) = {t ** (1 / self.alpha):.4g} is too wide for the grid "
                f"half-width L = {self.grid.L}; images cannot be corrected (t must be <= {self.max_time():.4g})")
        key = (t, order)
        with self._lock:
            hit = self._cache.get(key)
            if hit is not None:
                self._cache.move_to_end(key)
                return hit
        m = np.exp(-t * self.xi ** self.alpha)
        if order == 1:
            m = 1j * self.xi * m
        m = m - self.image_correction(t, order)
        m.setflags(write=False)
        with self._lock:
            self._cache[key] = m
            while len(self._cache) > _MULTIPLIER_CACHE:
                self._cache.popitem(last=False)
        return m

    def apply(self, values: np.ndarray, t: float, order: int = 0) -> np.ndarray:
        """Convolve raw samples (linear, no tail model)."""
        n = self.grid.n
        if values.shape[-1] != n:
            raise DomainError(f"expected {n} samples, got {values.shape[-1]}")
        padded = np.zeros(values.shape[:-1] + (self.size,))
        padded[..., :n] = values
        # input and output share the offset x_0 = -L, which circular convolution preserves
        out = np.fft.irfft(np.fft.rfft(padded) * self.multiplier(t, order), n=self.size)
        return out[..., :n]


@lru_cache(maxsize=16)
def convolution_plan(alpha: float, grid: Grid1D) -> ConvolutionPlan:
    """Shared plan for ``(alpha, grid)``."""
    return ConvolutionPlan(alpha, grid)


class KernelTail:
    """Tail model ``y -> sum_i c_i d^k_i/dy^k_i p(s_i, y)`` with ``k_i`` in {0, 1}.

    Convolutions against ``p(t, .)`` or ``p'(t, .)`` are exact:
    ``p^(j)(t) * p^(k)(s) = p^(j+k)(t + s)``.
    """

    def __init__(self, alpha: float, terms):
        self.alpha = float(alpha)
        self.terms = tuple((float(c), float(s), int(k)) for c, s, k in terms)
        for _, s, k in self.terms:
            if not s > 0 or k not in (0, 1):
                raise DomainError("tail terms need positive times and derivative order 0 or 1")
        self._params = KernelParams(1, self.alpha)

    def _derivative(self, order: int, t: float, x):
        if order == 0:
            return density(self._params, t, x)
        if order == 1:
            return gradient(self._params, t, x)
        return second_derivative_1d(self.alpha, t, x)

    def __call__(self, y) -> np.ndarray:
        return sum(c * self._derivative(k, s, y) for c, s, k in self.terms)

    def dilated(self, r: float) -> "KernelTail":
        """Model for ``y -> f(y / r) / r``."""
        return KernelTail(self.alpha, [(c * r ** k, s * r ** self.alpha, k) for c, s, k in self.terms])

    def convolved(self, t: float, order: int, x) -> np.ndarray:
        """``int p^(order)(t, x - y) f(y) dy`` over the whole line."""
        return sum(c * self._derivative(k + order, s + t, x) for c, s, k in self.terms)

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "terms": [list(term) for term in self.terms]}


def _tail_contribution(params: KernelParams, t: float, f: Profile, order: int) -> np.ndarray:
    """``int K(t, x - y) f(y) dy`` over the parts of the line the grid does not cover."""
    x = f.grid.x
    u, w = np.polynomial.legendre.leggauss(_TAIL_NODES)
    u = 0.5 * (u + 1.0)
    w = 0.5 * w
    width = max(t ** (1.0 / params.alpha), f.grid.h, 1.0)
    out = np.zeros_like(x)
    kern = density if order == 0 else gradient
    for edge, sgn in ((f.grid.upper_edge, 1.0), (f.grid.lower_edge, -1.0)):
        # y = edge + sgn * width * (s / (1 - s))^2: the square grades nodes toward the edge
        s = u / (1.0 - u)
        y = edge + sgn * width * s ** 2
        jac = width * 2.0 * s / (1.0 - u) ** 2 * w
        fy = f.tail(y) * jac
        for lo in range(0, x.size, 2048):
            xs = x[lo:lo + 2048]
            out[lo:lo + 2048] += kern(params, t, xs[:, None] - y[None, :]) @ fy
    return out


def _convolve(params: KernelParams, t: float, samples: Profile, order: int) -> Profile:
    if params.d != 1:
        raise DomainError("gridded convolution is only available for d = 1")
    if not isinstance(samples, Profile):
        raise DomainError("samples must be a Profile")
    plan = convolution_plan(params.alpha, samples.grid)
    tail = samples.tail
    if isinstance(tail, KernelTail):
        x = samples.grid.x
        values = plan.apply(samples.values - tail(x), t, order) + tail.convolved(t, order, x)
    else:
        values = plan.apply(samples.values, t, order)
        if tail is not None:
            values = values + _tail_contribution(params, t, samples, order)
    return Profile(samples.grid, values, {"convolved_with": "p" if order == 0 else "dp/dx", "t": t})


def stable_convolve(params: KernelParams, t: float, samples: Profile) -> Profile:
    """Grid samples of ``x -> int p(t, x - w) f(w) dw``.

    Linear in the samples.  If ``samples.tail`` is set, the part of ``f``
    beyond the grid is included; otherwise ``f`` is taken to vanish there.
    Raises :class:`WrapAroundError` when ``p(t, .)`` is too wide for the grid
    for the periodic images to be removed exactly.
    """
    return _convolve(params, t, samples, 0)


def grad_stable_convolve(params: KernelParams, t: float, samples: Profile) -> Profile:
    """Grid samples of ``x -> int p'(t, x - w) f(w) dw`` (derivative in the first slot)."""
    return _convolve(params, t, samples, 1)


class Dilation:
    """Cell averages of ``y -> G(y / r) / r`` on the grid of ``G``, for any ``0 < r <= 1``.

    ``region`` restricts ``G`` to ``|w| < R`` (``("inside", R)``) or
    ``|w| > R`` (``("outside", R)``) before dilation; the cut is placed
    exactly.  A :class:`KernelTail` on ``G`` is subtracted on the grid, so the
    averages describe ``G - model`` and the model is handled in closed form.
    """

    def __init__(self, G: Profile, region: tuple[str, float] | None = None):
        grid = G.grid
        self.grid = grid
        self.edges = np.append(grid.x - 0.5 * grid.h, grid.upper_edge)
        self.region = region
        if region is not None and region[0] not in ("inside", "outside"):
            raise DomainError("region must be ('inside', R) or ('outside', R)")
        self._cum = CubicSpline(self.edges, np.concatenate([[0.0], np.cumsum(G.values) * grid.h]))
        self.model = G.tail if isinstance(G.tail, KernelTail) else None
        if G.tail is not None and self.model is None:
            raise DomainError("dilated integrals need a KernelTail (or no tail)")
        if self.model is not None and region is not None and region[0] == "inside":
            self.model = None                      # the tail lies outside the ball
        if self.model is not None:
            m = self.model(grid.x)
            self._cum_model = CubicSpline(self.edges, np.concatenate([[0.0], np.cumsum(m) * grid.h]))

    def _cumulative(self, w: np.ndarray) -> np.ndarray:
        lo, hi = self.edges[0], self.edges[-1]
        wc = np.clip(w, lo, hi)
        c = self._cum(wc)
        if self.region is not None:
            kind, R = self.region
            inner = self._cum(np.clip(wc, max(-R, lo), min(R, hi))) - self._cum(max(min(-R, hi), lo))
            c = inner if kind == "inside" else c - inner
        if self.model is not None:
            c = c - self._cum_model(wc)
        return c

    def averages(self, r: float) -> np.ndarray:
        c = self._cumulative(self.edges / r)
        return np.diff(c) / self.grid.h


def ray_rule(alpha: float, n: int = 64, left: float = 0.0):
    """Fixed ``n``-node rule on (0, 1) for ``int_0^1 r^-left (1 - r^alpha)^(-1/alpha) g(r) dr``.

    Half the nodes sit on (0, 1/2), graded toward 0 for ``left > 0``; the other
    half on (1/2, 1), graded toward 1 for the ``(1 - r)^(-1/alpha)`` factor.
    Returns ``(nodes, weights, gaps)`` with exact gaps ``1 - r``; weights do not
    include the singular factors.
    """
    if n < 2 or n % 2:
        raise DomainError("ray rules need an even number of nodes")
    from .quadrature import gauss_legendre_rule

    r0, w0, g0 = gauss_legendre_rule(n // 2, 0.0, 0.5, right=left, gaps=True)
    r1, w1, g1 = gauss_legendre_rule(n // 2, 0.5, 1.0, right=1.0 / alpha, gaps=True)
    # mirror the first half so that its grading points at r = 0
    nodes = np.concatenate([g0, r1])
    gaps = np.concatenate([1.0 - g0, g1])
    weights = np.concatenate([w0, w1])
    order = np.argsort(nodes, kind="stable")
    return nodes[order], weights[order], gaps[order]


def ray_times(alpha: float, nodes, gaps=None) -> np.ndarray:
    """``1 - r^alpha`` at the nodes, from the exact gaps ``1 - r`` when given."""
    if gaps is None:
        return -np.expm1(alpha * np.log(np.asarray(nodes, float)))
    return -np.expm1(alpha * np.log1p(-np.asarray(gaps, float)))


def ray_integral(params: KernelParams, G: Profile, nodes, weights, order: int = 0,
                 region: tuple[str, float] | None = None, gaps=None) -> np.ndarray:
    """``sum_i weights_i int K(1 - r_i^alpha, x - r_i w) G(w) dw`` at the grid points.

    ``K`` is ``p`` (order 0) or ``p'`` (order 1).  Uses the identity
    ``int K(tau, x - r w) G(w) dw = int K(tau, x - y) G(y/r)/r dy``.
    ``gaps`` (exact ``1 - r``) keeps ``tau`` accurate for nodes next to 1.
    """
    if params.d != 1:
        raise DomainError("ray integrals are only available for d = 1")
    dil = Dilation(G, region)
    plan = convolution_plan(params.alpha, G.grid)
    x = G.grid.x
    out = np.zeros_like(x)
    taus = ray_times(params.alpha, nodes, gaps)
    for r, wgt, tau in zip(np.asarray(nodes, float), np.asarray(weights, float), taus):
        if not 0.0 < r <= 1.0:
            raise DomainError("ray nodes must lie in (0, 1]")
        avg = dil.averages(r)
        if tau == 0.0:
            # limit r -> 1: the kernel is the identity (order 0) or d/dx
            val = avg if order == 0 else np.gradient(avg, G.grid.h)
        else:
            val = plan.apply(avg, tau, order)
        if dil.model is not None:
            model = dil.model.dilated(r)
            val = val + (model.convolved(tau, order, x) if tau > 0 else model(x))
        out += wgt * val
    return out
