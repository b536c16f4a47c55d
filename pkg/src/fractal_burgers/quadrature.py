"""Adaptive Gauss-Kronrod quadrature with algebraic endpoint singularities.

The integrand is always evaluated on whole arrays of nodes, so callers should
pass vectorised callables.  Endpoint singularities of the form ``(r - lo)^-a``
and ``(hi - r)^-b`` are removed by a power substitution before the adaptive
panels see the integrand, which keeps the bisection depth shallow.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError, QuadratureError

# Kronrod 15-point abscissae/weights and the embedded 7-point Gauss weights.
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

_MAX_PANELS = 100_000

_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])            # 15 nodes on [-1, 1]
_KWEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GWEIGHTS = np.zeros(15)
_GWEIGHTS[[1, 3, 5]] = _WG[:3]
_GWEIGHTS[[9, 11, 13]] = _WG[2::-1]
_GWEIGHTS[7] = _WG[3]


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances and declared endpoint behaviour of an integrand on (0, 1).

    ``endpoint_exponents = (a, b)`` declares ``f ~ r^-a`` near 0 and
    ``f ~ (1 - r)^-b`` near 1.  Both must be below 1 (integrable).
    """

    abs_tol: float = 1e-13
    rel_tol: float = 1e-11
    max_depth: int = 48
    endpoint_exponents: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        a, b = self.endpoint_exponents
        if not (a < 1 and b < 1):
            raise DomainError(f"endpoint exponents must be < 1, got {(a, b)}")
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise DomainError("quadrature tolerances must be positive")
        if self.max_depth < 1:
            raise DomainError("max_depth must be at least 1")


def gauss_kronrod(f: Callable[[np.ndarray], np.ndarray], lo: float, hi: float,
                  abs_tol: float = 1e-13, rel_tol: float = 1e-11,
                  max_depth: int = 48, initial_panels: int = 1) -> tuple[float, float]:
    """Globally adaptive G7/K15 quadrature of ``f`` over the finite ``[lo, hi]``.

    Returns ``(value, error_estimate)``.  A panel is bisected while its error
    exceeds its length share of the global tolerance; reaching ``max_depth``
    with unresolved panels raises :class:`QuadratureError`.
    """
    if not (np.isfinite(lo) and np.isfinite(hi)):
        raise DomainError("gauss_kronrod needs a finite interval; map infinite ranges first")
    if hi == lo:
        return 0.0, 0.0
    sign = 1.0
    if hi < lo:
        lo, hi, sign = hi, lo, -1.0
    width = hi - lo
    edges = np.linspace(lo, hi, initial_panels + 1)
    a, b = edges[:-1], edges[1:]
    depth = 0
    accepted_val = 0.0
    accepted_err = 0.0
    while True:
        half = 0.5 * (b - a)
        mid = 0.5 * (b + a)
        x = mid[:, None] + half[:, None] * _NODES[None, :]
        fx = np.asarray(f(x.ravel()), dtype=float).reshape(x.shape)
        if not np.all(np.isfinite(fx)):
            raise QuadratureError("integrand returned non-finite values")
        kron = half * (fx @ _KWEIGHTS)
        gauss = half * (fx @ _GWEIGHTS)
        err = np.abs(kron - gauss)
        roundoff = 50.0 * np.finfo(float).eps * half * (np.abs(fx) @ _KWEIGHTS)
        err = np.where(err < roundoff, 0.0, err)
        total = accepted_val + kron.sum()
        tol = max(abs_tol, rel_tol * abs(total))
        share = tol * (b - a) / width
        if accepted_err + err.sum() <= tol:
            return sign * (accepted_val + kron.sum()), accepted_err + err.sum()
        done = err <= share
        accepted_val += kron[done].sum()
        accepted_err += err[done].sum()
        depth += 1
        if depth > max_depth or np.count_nonzero(~done) > _MAX_PANELS:
            raise QuadratureError(
                f"refinement depth {max_depth} exceeded on {np.count_nonzero(~done)} panels "
                f"(worst error {err[~done].max():.3e} near r={mid[~done][np.argmax(err[~done])]:.6g})")
        a_open, b_open, m_open = a[~done], b[~done], mid[~done]
        a = np.concatenate([a_open, m_open])
        b = np.concatenate([m_open, b_open])


def integrate(f: Callable[..., np.ndarray], lo: float, hi: float,
              left: float = 0.0, right: float = 0.0, abs_tol: float = 1e-13,
              rel_tol: float = 1e-11, max_depth: int = 48, split: float | None = None,
              distances: bool = False) -> float:
    """Integrate ``f`` over ``(lo, hi)`` with declared algebraic endpoint singularities.

    ``left``/``right`` are the exponents ``a``/``b`` in ``f ~ (r-lo)^-a`` and
    ``f ~ (hi-r)^-b``.  The interval is split (at ``split`` or the midpoint);
    each half is mapped by ``r = lo + (s-lo) u^(1/(1-a))`` (resp. the mirror
    image) which makes the transformed integrand bounded.

    With ``distances=True`` the integrand is called as ``f(r, r - lo, hi - r)``
    where both distances are computed without cancellation; singular factors
    such as ``1 - r**alpha`` should then be formed from them.  Without it, a
    right-endpoint singularity is only as accurate as ``hi - r`` is in floating
    point, and tight tolerances will stall.
    """
    if not (left < 1 and right < 1):
        raise DomainError(f"endpoint exponents must be < 1, got {(left, right)}")
    mid = 0.5 * (lo + hi) if split is None else split
    total = 0.0
    for a_exp, base, length, direction in ((left, lo, mid - lo, 1.0), (right, hi, hi - mid, -1.0)):
        if length == 0:
            continue
        kappa = 1.0 / (1.0 - a_exp) if a_exp > 0 else 1.0

        inner = np.nextafter(base, base + direction)

        def mapped(u, kappa=kappa, base=base, length=length, direction=direction, inner=inner):
            dist = length * u ** kappa
            r = base + direction * dist
            # nodes that round onto the singular endpoint carry negligible weight
            r = np.maximum(r, inner) if direction > 0 else np.minimum(r, inner)
            jac = length * kappa * u ** (kappa - 1.0)
            if not distances:
                # r cannot resolve distances below this; the mapped integrand is
                # bounded, so dropping that sliver costs at most its length in u
                unresolved = dist < 16.0 * np.finfo(float).eps * max(abs(base), 1.0)
                return np.where(unresolved, 0.0, f(r) * jac)
            if direction > 0:
                return f(r, dist, (hi - base) - dist) * jac
            return f(r, (base - lo) - dist, dist) * jac

        val, _ = gauss_kronrod(mapped, 0.0, 1.0, abs_tol=0.5 * abs_tol, rel_tol=rel_tol,
                               max_depth=max_depth)
        total += val
    return total


def singular_quad(f: Callable[..., np.ndarray], spec: QuadratureSpec | None = None,
                  distances: bool = False) -> float:
    """Integral of ``f`` over (0, 1) honouring ``spec.endpoint_exponents``.

    ``distances`` is forwarded to :func:`integrate`.

    >>> round(singular_quad(lambda r: r ** -0.5, QuadratureSpec(endpoint_exponents=(0.5, 0.0))), 12)
    2.0
    """
    spec = spec or QuadratureSpec()
    a, b = spec.endpoint_exponents
    return integrate(f, 0.0, 1.0, left=a, right=b, abs_tol=spec.abs_tol,
                     rel_tol=spec.rel_tol, max_depth=spec.max_depth, distances=distances)


def gauss_legendre_rule(n: int, lo: float = 0.0, hi: float = 1.0, right: float = 0.0,
                        gaps: bool = False):
    """Fixed ``n``-node rule on ``[lo, hi]``, optionally graded toward ``hi``.

    With ``right = b > 0`` the nodes come from ``r = hi - (hi-lo) u^(1/(1-b))``
    so integrands behaving like ``(hi - r)^-b`` are integrated without loss.
    With ``gaps=True`` the exact distances ``hi - r`` are returned as a third
    array (the nodes themselves may round onto ``hi``).
    """
    u, w = np.polynomial.legendre.leggauss(n)
    u = 0.5 * (u + 1.0)
    w = 0.5 * w
    kappa = 1.0 / (1.0 - right) if right > 0 else 1.0
    gap = (hi - lo) * u ** kappa
    r = hi - gap
    wr = w * (hi - lo) * kappa * u ** (kappa - 1.0)
    order = np.argsort(-gap)
    if gaps:
        return r[order], wr[order], gap[order]
    return r[order], wr[order]
