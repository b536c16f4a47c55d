"""Isotropic alpha-stable heat kernel ``p(t, x)`` in dimensions 1 to 3.

Everything reduces to radial profiles at unit time,

    p_d(t, x) = t^(-d/alpha) P_d(|x| t^(-1/alpha)),

and the gradient identity ``grad p_d(t, x) = -2 pi x t^(-(d+2)/alpha) P_{d+2}(rho)``
means that profiles for ``m = 1..5`` cover densities and gradients for
``d <= 3``.  Each profile is evaluated by one of three branches:

* the convergent power series near the origin,
* the asymptotic (Polya) tail series far out,
* a Chebyshev table in between, built once per ``(alpha, m)`` from Zolotarev's
  non-oscillatory integral (odd ``m``) or from the marginal identity
  ``P_m(r) = 2 int_0^inf P_{m+1}(sqrt(r^2 + v^2)) dv`` (even ``m``).

Branch boundaries are chosen per profile from the series' own error estimates.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from .errors import DomainError
from .quadrature import gauss_kronrod, integrate

_SERIES_TERMS = 200
_ASYMPTOTIC_TERMS = 120
_BRANCH_TOL = 1e-14
_TABLE_TOL = 1e-13
_TABLE_DEGREE = 24
_CHUNK = 512
_NEGLIGIBLE = 40.0     # log-magnitude drop below which series terms are dropped


@dataclass(frozen=True)
class KernelParams:
    """Dimension ``d`` and stability index ``alpha`` of the kernel."""

    d: int
    alpha: float

    def __post_init__(self):
        if not (isinstance(self.d, (int, np.integer)) and 1 <= self.d <= 3):
            raise DomainError(f"dimension d must be 1, 2 or 3, got {self.d!r}")
        if not (1.0 < float(self.alpha) < 2.0):
            raise DomainError(f"alpha must lie in the open interval (1, 2), got {self.alpha!r}")

    @property
    def q(self) -> float:
        """Critical exponent ``(alpha - 1) / d``."""
        return (self.alpha - 1.0) / self.d


def _check_time(t):
    t = np.asarray(t, dtype=float)
    if np.any(~(t > 0)):
        raise DomainError("time t must be positive")
    return t


# ---------------------------------------------------------------------------
# series branches


def _series_log_coeffs(alpha: float, m: int) -> np.ndarray:
    k = np.arange(_SERIES_TERMS)
    return (np.log(2.0 / (alpha * (4.0 * np.pi) ** (m / 2.0)))
            + gammaln((2 * k + m) / alpha) - gammaln(k + 1.0) - gammaln(k + m / 2.0))


def _sorted_chunks(rho: np.ndarray):
    """Yield index blocks of ``rho`` in increasing order (homogeneous chunks truncate well)."""
    order = np.argsort(rho, kind="stable")
    for s in range(0, rho.size, _CHUNK):
        yield order[s:s + _CHUNK]


def _series(alpha: float, m: int, rho: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Power series value and a relative error estimate (cancellation + truncation)."""
    logc = _series_log_coeffs(alpha, m)
    k = np.arange(_SERIES_TERMS)
    sign = np.where(k % 2 == 0, 1.0, -1.0)
    val = np.empty_like(rho)
    err = np.empty_like(rho)
    for idx in _sorted_chunks(rho):
        r = rho[idx]
        # the largest rho of the chunk needs the most terms
        top = logc + 2.0 * k * np.log(max(r[-1], 1e-300) / 2.0)
        big = np.nonzero(top > top.max() - _NEGLIGIBLE)[0]
        kk = k[:big[-1] + 2] if big[-1] + 2 <= k.size else k
        lr = np.log(np.maximum(r, 1e-300) / 2.0)
        logt = logc[kk, None] + 2.0 * kk[:, None] * lr[None, :]
        logt[1:, r == 0] = -np.inf
        # far outside its range the series overflows; the error estimate then rejects it
        with np.errstate(over="ignore", invalid="ignore"):
            mag = np.exp(logt)
            v = (sign[kk, None] * mag).sum(axis=0)
            absum = mag.sum(axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            err[idx] = (np.finfo(float).eps * 4 * absum + mag[-1]) / np.abs(v)
        val[idx] = v
    return val, err


def _asymptotic_log_coeffs(alpha: float, m: int) -> tuple[np.ndarray, np.ndarray]:
    k = np.arange(1, _ASYMPTOTIC_TERMS + 1)
    logb = (gammaln(k * alpha / 2.0 + 1.0) + gammaln((k * alpha + m) / 2.0)
            + k * alpha * np.log(2.0) - (m / 2.0) * np.log(np.pi) - np.log(np.pi) - gammaln(k + 1.0))
    sign = np.where(k % 2 == 1, 1.0, -1.0) * np.sin(np.pi * k * alpha / 2.0)
    return logb, sign


def _asymptotic(alpha: float, m: int, rho: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Optimally truncated tail series and its relative error estimate."""
    logb, sign = _asymptotic_log_coeffs(alpha, m)
    k = np.arange(1, _ASYMPTOTIC_TERMS + 1)
    val = np.empty_like(rho)
    err = np.empty_like(rho)
    for idx in _sorted_chunks(rho):
        lr = np.log(rho[idx])
        # terms needed: bounded by relative decay at the smallest rho and by the
        # optimal truncation point at the largest rho
        lo = logb - (m + k * alpha) * lr[0]
        small = np.nonzero(lo - lo[0] > -_NEGLIGIBLE)[0]
        hi_stop = np.argmin(logb - (m + k * alpha) * lr[-1])
        kcut = min(small[-1] + 2, hi_stop + 1, k.size)
        if np.argmin(lo[:kcut]) == kcut - 1:
            # terms still shrink at the smallest rho: no per-point truncation, Horner in rho^-alpha
            z = np.exp(-alpha * lr)
            coef = sign[:kcut] * np.exp(logb[:kcut])
            v = np.zeros_like(z)
            absum = np.zeros_like(z)
            for c in coef[::-1]:
                v = (v + c) * z
                absum = (absum + abs(c)) * z
            scale = np.exp(-m * lr)
            last = np.exp(logb[kcut - 1] - (m + kcut * alpha) * lr)
            with np.errstate(divide="ignore", invalid="ignore"):
                err[idx] = (last + np.finfo(float).eps * 4 * absum * scale) / np.abs(v * scale)
            val[idx] = v * scale
            continue
        kk = k[:kcut]
        logmag = logb[:kcut, None] - (m + kk[:, None] * alpha) * lr[None, :]
        stop = np.argmin(logmag, axis=0)
        with np.errstate(over="ignore"):
            mag = np.exp(logmag)
        keep = kk[:, None] - 1 < stop[None, :]
        terms = np.where(keep, sign[:kcut, None] * mag, 0.0)
        v = terms.sum(axis=0)
        smallest = np.take_along_axis(mag, stop[None, :], axis=0)[0]
        with np.errstate(divide="ignore", invalid="ignore"):
            err[idx] = (smallest + np.finfo(float).eps * 4 * np.abs(terms).sum(axis=0)) / np.abs(v)
        val[idx] = v
    return val, err


def tail_coefficients(alpha: float, terms: int = 8) -> np.ndarray:
    """Coefficients ``A_k`` of ``p_1(t, x) ~ sum_k A_k t^k |x|^(-1-k alpha)``, k = 1..terms."""
    k = np.arange(1, terms + 1)
    return (np.where(k % 2 == 1, 1.0, -1.0) * np.exp(gammaln(k * alpha + 1.0) - gammaln(k + 1.0))
            * np.sin(np.pi * k * alpha / 2.0) / np.pi)


# ---------------------------------------------------------------------------
# Zolotarev representation (d = 1) used to build the mid-range tables


def _zolotarev_log_v(alpha, theta, dist_to_half_pi):
    cos_t = np.sin(dist_to_half_pi)
    return ((alpha / (alpha - 1.0)) * (np.log(cos_t) - np.log(np.sin(alpha * theta)))
            + np.log(np.cos((alpha - 1.0) * theta)) - np.log(cos_t))


def zolotarev_derivatives(alpha: float, x: float) -> tuple[float, float, float]:
    """``p_1(1, x)`` and its first two x-derivatives for ``x > 0``.

    Uses the symmetric-case integral
    ``p(x) = alpha/(pi (alpha-1)) s^(1/alpha) int_0^(pi/2) V e^(-s V) d theta``
    with ``s = x^(alpha/(alpha-1))``; the integrand is positive, so the value
    keeps full relative accuracy.
    """
    if not x > 0:
        raise DomainError("Zolotarev representation needs x > 0")
    a = alpha
    s = x ** (a / (a - 1.0))
    logs = np.log(s)
    half_pi = 0.5 * np.pi

    # peak of V e^{-sV} sits where s V = 1; V decreases monotonically in theta
    lo, hi = 0.0, half_pi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if logs + _zolotarev_log_v(a, mid, half_pi - mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    peak = 0.5 * (lo + hi)

    def moments(theta, d0, d1):
        logv = _zolotarev_log_v(a, theta, d1)
        sv = np.exp(logs + logv)
        base = np.exp(logv - sv)
        return np.stack([base, base * np.exp(logv), base * np.exp(2 * logv)])

    g = np.zeros(3)
    for k in range(3):
        g[k] = integrate(lambda th, d0, d1, k=k: moments(th, d0, d1)[k], 0.0, half_pi,
                         split=min(max(peak, 1e-12), half_pi - 1e-12), abs_tol=1e-300,
                         rel_tol=1e-14, distances=True)
    g1, g2, g3 = g
    c = a / (np.pi * (a - 1.0))
    e = 1.0 / a
    f0 = c * s ** e * g1
    f1s = c * (e * s ** (e - 1) * g1 - s ** e * g2)
    f2s = c * (e * (e - 1) * s ** (e - 2) * g1 - 2 * e * s ** (e - 1) * g2 + s ** e * g3)
    dsdx = a / (a - 1.0) * s / x
    d2sdx2 = a / (a - 1.0) * (a / (a - 1.0) - 1.0) * s / x ** 2
    return f0, f1s * dsdx, f2s * dsdx ** 2 + f1s * d2sdx2


def _odd_profiles_from_zolotarev(alpha: float, rho: float) -> dict[int, float]:
    f0, f1, f2 = zolotarev_derivatives(alpha, rho)
    return {1: f0,
            3: -f1 / (2 * np.pi * rho),
            5: (f2 * rho - f1) / (4 * np.pi ** 2 * rho ** 3)}


# ---------------------------------------------------------------------------
# radial profile objects


class RadialProfile:
    """Vectorised ``P_m(rho)`` for one ``(alpha, m)``; build through :func:`radial_profile`."""

    def __init__(self, alpha: float, m: int):
        self.alpha = float(alpha)
        self.m = int(m)
        self.rho_series, self.rho_asymptotic = self._branch_limits()
        self._edges = np.empty(0)
        self._coeffs = np.empty((0, _TABLE_DEGREE + 1))
        if self.rho_asymptotic > self.rho_series:
            self._build_table()

    def _branch_limits(self) -> tuple[float, float]:
        scan = np.geomspace(1e-3, 1e4, 561)
        _, serr = _series(self.alpha, self.m, scan)
        _, aerr = _asymptotic(self.alpha, self.m, scan)
        bad = np.nonzero(~(serr < _BRANCH_TOL))[0]
        rho_s = scan[-1] if not bad.size else (scan[bad[0] - 1] if bad[0] > 0 else 0.0)
        bad = np.nonzero(~(aerr < _BRANCH_TOL))[0]
        if bad.size and bad[-1] == scan.size - 1:
            raise DomainError(f"tail series never converges for alpha={self.alpha}, m={self.m}")
        rho_a = scan[bad[-1] + 1] if bad.size else scan[0]
        return float(rho_s), float(rho_a)

    # exact (slow) evaluation for table construction -------------------------
    def _exact(self, rho: np.ndarray) -> np.ndarray:
        rho = np.atleast_1d(np.asarray(rho, dtype=float))
        if self.m % 2 == 1:
            return np.array([_odd_profiles_from_zolotarev(self.alpha, r)[self.m] for r in rho])
        upper = radial_profile(self.alpha, self.m + 1)
        out = np.empty_like(rho)
        for i, r in enumerate(rho):
            c = max(r, 1.0)

            def integrand(u, r=r, c=c):
                v = c * u / (1.0 - u)
                return upper(np.hypot(r, v)) * c / (1.0 - u) ** 2

            # integrand decays like (1-u)^(m+alpha-1) at u -> 1
            val, _ = gauss_kronrod(integrand, 0.0, 1.0, abs_tol=1e-300, rel_tol=2e-13,
                                   initial_panels=8)
            out[i] = 2.0 * val
        return out

    def _build_table(self):
        lo, hi = np.log(self.rho_series), np.log(self.rho_asymptotic)
        nodes = np.cos(np.pi * (np.arange(_TABLE_DEGREE + 1) + 0.5) / (_TABLE_DEGREE + 1))
        pending = list(zip(np.linspace(lo, hi, 5)[:-1], np.linspace(lo, hi, 5)[1:]))
        panels = []
        while pending:
            a, b = pending.pop()
            xs = 0.5 * (a + b) + 0.5 * (b - a) * nodes
            coef = np.polynomial.chebyshev.chebfit(nodes, np.log(self._exact(np.exp(xs))), _TABLE_DEGREE)
            check = 0.5 * (a + b) + 0.5 * (b - a) * np.array([-0.97, -0.5, 0.13, 0.77])
            approx = np.polynomial.chebyshev.chebval((check - 0.5 * (a + b)) / (0.5 * (b - a)), coef)
            truth = np.log(self._exact(np.exp(check)))
            # the panel floor bounds work where the Zolotarev values are noise-limited
            if np.max(np.abs(approx - truth)) > _TABLE_TOL and b - a > 0.02:
                pending += [(a, 0.5 * (a + b)), (0.5 * (a + b), b)]
            else:
                panels.append((a, b, coef))
        panels.sort(key=lambda p: p[0])
        self._edges = np.array([p[0] for p in panels] + [panels[-1][1]])
        self._coeffs = np.array([p[2] for p in panels])

    def _table(self, rho: np.ndarray) -> np.ndarray:
        lr = np.log(rho)
        idx = np.clip(np.searchsorted(self._edges, lr, side="right") - 1, 0, len(self._coeffs) - 1)
        a, b = self._edges[idx], self._edges[idx + 1]
        z = (lr - 0.5 * (a + b)) / (0.5 * (b - a))
        c = self._coeffs[idx]
        # Clenshaw with per-point coefficient rows
        b1 = np.zeros_like(z)
        b2 = np.zeros_like(z)
        for j in range(_TABLE_DEGREE, 0, -1):
            b1, b2 = 2.0 * z * b1 - b2 + c[:, j], b1
        return np.exp(z * b1 - b2 + c[:, 0])

    def __call__(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        flat = np.abs(rho).ravel()
        out = np.empty_like(flat)
        s = flat <= self.rho_series
        a = (flat >= self.rho_asymptotic) & ~s
        mid = ~(s | a)
        if s.any():
            out[s] = _series(self.alpha, self.m, flat[s])[0]
        if a.any():
            out[a] = _asymptotic(self.alpha, self.m, flat[a])[0]
        if mid.any():
            out[mid] = self._table(flat[mid])
        return out.reshape(rho.shape)


_lock = threading.RLock()


@lru_cache(maxsize=None)
def _radial_profile_cached(alpha: float, m: int) -> RadialProfile:
    return RadialProfile(alpha, m)


def radial_profile(alpha: float, m: int) -> RadialProfile:
    """Shared, lazily built ``P_m`` for stability index ``alpha`` (``1 <= m <= 5``)."""
    if not 1 <= m <= 5:
        raise DomainError("radial profiles are available for m = 1..5")
    with _lock:
        return _radial_profile_cached(float(alpha), int(m))


# ---------------------------------------------------------------------------
# public kernel operations


def _split_position(params: KernelParams, x) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    if params.d == 1:
        return x, np.abs(x)
    if x.shape[-1:] != (params.d,):
        raise DomainError(f"positions must have trailing dimension {params.d}")
    return x, np.linalg.norm(x, axis=-1)


def density(params: KernelParams, t, x) -> np.ndarray:
    """``p(t, x)`` for scalar or array ``t`` and positions ``x``.

    For ``d = 1`` positions are plain numbers; for ``d > 1`` the last axis of
    ``x`` holds the coordinates.
    """
    t = _check_time(t)
    _, r = _split_position(params, x)
    scale = t ** (-1.0 / params.alpha)
    return t ** (-params.d / params.alpha) * radial_profile(params.alpha, params.d)(r * scale)


def gradient(params: KernelParams, t, x) -> np.ndarray:
    """Spatial gradient of ``p(t, .)`` at ``x`` (same shape as ``x``)."""
    t = _check_time(t)
    x, r = _split_position(params, x)
    scale = t ** (-1.0 / params.alpha)
    radial = t ** (-(params.d + 2) / params.alpha) * radial_profile(params.alpha, params.d + 2)(r * scale)
    if params.d > 1:
        radial = radial[..., None]
    return -2.0 * np.pi * x * radial


def second_derivative_1d(alpha: float, t, x) -> np.ndarray:
    """``d^2/dx^2 p_1(t, x)`` from the identity ``P_1'' = -2 pi P_3 + 4 pi^2 rho^2 P_5``."""
    t = _check_time(t)
    rho = np.abs(np.asarray(x, dtype=float)) * t ** (-1.0 / alpha)
    return t ** (-3.0 / alpha) * (-2 * np.pi * radial_profile(alpha, 3)(rho)
                                  + 4 * np.pi ** 2 * rho ** 2 * radial_profile(alpha, 5)(rho))


def envelope(params: KernelParams, t, x, kind: str = "density") -> np.ndarray:
    """Two-sided comparison profile for the density or the gradient norm.

    ``density``: ``t / (t^(1/alpha) + |x|)^(d+alpha)``;
    ``gradient``: ``t |x| / (t^(1/alpha) + |x|)^(d+2+alpha)``.
    """
    t = _check_time(t)
    _, r = _split_position(params, x)
    base = t ** (1.0 / params.alpha) + r
    if kind == "density":
        return t / base ** (params.d + params.alpha)
    if kind == "gradient":
        return t * r / base ** (params.d + 2 + params.alpha)
    raise DomainError(f"envelope kind must be 'density' or 'gradient', got {kind!r}")


def _unit_sphere_area(d: int) -> float:
    return float(2.0 * np.pi ** (d / 2.0) / np.exp(gammaln(d / 2.0)))


def ball_mass(params: KernelParams, t: float, eps: float, rel_tol: float = 1e-13) -> float:
    """``int_{B(0, eps)} p(t, w) dw`` by radial quadrature to relative accuracy ``rel_tol``."""
    t = float(_check_time(t))
    if not eps > 0:
        raise DomainError("ball radius eps must be positive")
    d, a = params.d, params.alpha
    prof = radial_profile(a, d)
    area = _unit_sphere_area(d)
    e = eps * t ** (-1.0 / a)
    if e <= 1.0:
        val, _ = gauss_kronrod(lambda r: r ** (d - 1) * prof(r), 0.0, e, abs_tol=1e-300,
                               rel_tol=rel_tol, initial_panels=4)
        return area * val

    # complement: rho = e u^(-1/alpha) turns the |rho|^(-1-alpha) tail into a bounded integrand
    def tail(u):
        rho = e * u ** (-1.0 / a)
        return rho ** (d - 1) * prof(rho) * (e / a) * u ** (-1.0 / a - 1.0)

    val, _ = gauss_kronrod(tail, 0.0, 1.0, abs_tol=1e-300, rel_tol=rel_tol, initial_panels=4)
    return 1.0 - area * val


def density_at_origin(params: KernelParams, t: float = 1.0) -> float:
    """Closed form ``p(t, 0) = omega_d Gamma(d/alpha) t^(-d/alpha) / (alpha (2 pi)^d)``."""
    d, a = params.d, params.alpha
    return float(_unit_sphere_area(d) * np.exp(gammaln(d / a)) * t ** (-d / a) / (a * (2 * np.pi) ** d))


def envelope_bracket(params: KernelParams, kind: str = "density", times=(0.01, 1.0, 100.0),
                     radius: float = 100.0, points: int = 2001) -> tuple[float, float]:
    """``(inf, sup)`` of density/envelope (or |gradient|/envelope) over a sweep.

    Positions are ``|x| <= radius`` on a uniform grid along the first axis;
    ``x = 0`` is skipped for the gradient, where both sides vanish.
    """
    r = np.linspace(0.0, radius, points)
    if kind == "gradient":
        r = r[1:]
    ratios = []
    for t in times:
        x = r if params.d == 1 else np.stack([r] + [np.zeros_like(r)] * (params.d - 1), axis=-1)
        if kind == "density":
            num = density(params, t, x)
        elif kind == "gradient":
            g = gradient(params, t, x)
            num = np.abs(g) if params.d == 1 else np.linalg.norm(g, axis=-1)
        else:
            raise DomainError(f"envelope kind must be 'density' or 'gradient', got {kind!r}")
        ratios.append(num / envelope(params, t, x, kind))
    ratios = np.concatenate(ratios)
    return float(ratios.min()), float(ratios.max())
