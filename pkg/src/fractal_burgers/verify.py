"""Numerical checks of the two-sided kernel bound on computed source profiles.

Every check works on a :class:`~fractal_burgers.grid.Profile` whose ``meta``
carries ``alpha``, ``M`` and ``b`` (as written by the solvers) and compares it
with the stable density ``p(t, .)`` at the profile's time ``meta["t"]``
(default 1).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Any, Mapping, Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize_scalar

from .convolution import KernelTail
from .errors import DomainError
from .functionals import FunctionalParams, _jsonable, closed_form_C2, h_functionals, hh_bracket
from .grid import Grid1D, Profile
from .kernel import KernelParams, density, gradient
from .solver import DuhamelMap, SolverConfig

NEGATIVITY_TOL = 1e-8


def _kernel(profile: Profile) -> KernelParams:
    try:
        return KernelParams(int(profile.meta.get("d", 1)), float(profile.meta["alpha"]))
    except KeyError:
        raise DomainError("profile meta must record alpha") from None


def _time(profile: Profile) -> float:
    return float(profile.meta.get("t", 1.0))


def _check_sign(profile: Profile) -> None:
    u = profile.values
    if u.min() < -NEGATIVITY_TOL * u.max():
        raise DomainError(f"profile dips to {u.min():.3e} (max {u.max():.3e}); not a source profile")


def solver_config(profile: Profile, **overrides) -> SolverConfig:
    """The :class:`SolverConfig` a profile was produced under, on its own grid.

    The fixed-point map lives at ``t = 1``; other times must be rescaled first
    (:func:`rescale_profile`).
    """
    meta = profile.meta
    if abs(_time(profile) - 1.0) > 1e-12:
        raise DomainError(f"profile is at t = {_time(profile):g}; rescale it to t = 1 first")
    try:
        return SolverConfig(_kernel(profile), M=float(meta["M"]), b=float(meta["b"]),
                            grid=profile.grid, **overrides)
    except KeyError as exc:
        raise DomainError(f"profile meta lacks {exc.args[0]!r}") from None


# ---------------------------------------------------------------------------
# comparison with the kernel


@dataclass
class RatioReport:
    """Extrema of ``u / p`` on ``|x| <= window`` and over ``|x| > tail_radius``."""

    ratio_inf: float
    ratio_sup: float
    arg_inf: float
    arg_sup: float
    tail_band: tuple[float, float]
    window: float
    tail_radius: float

    @property
    def passed(self) -> bool:
        return bool(0.0 < self.ratio_inf <= self.ratio_sup < np.inf)

    def to_dict(self) -> dict:
        return _jsonable({**asdict(self), "passed": self.passed})


def ratio_report(profile: Profile, window: float = 50.0, tail_radius: float = 30.0) -> RatioReport:
    """Extrema of ``u(t, x) / p(t, x)`` over the grid points with ``|x| <= window``."""
    _check_sign(profile)
    x = profile.x
    ratio = profile.values / density(_kernel(profile), _time(profile), x)
    inside = np.abs(x) <= window
    tail = np.abs(x) > tail_radius
    if not inside.any() or not tail.any():
        raise DomainError("window and tail radius must each select grid points")
    xi, ri = x[inside], ratio[inside]
    lo, hi = int(np.argmin(ri)), int(np.argmax(ri))
    return RatioReport(float(ri[lo]), float(ri[hi]), float(xi[lo]), float(xi[hi]),
                       (float(ratio[tail].min()), float(ratio[tail].max())), float(window), float(tail_radius))


def rescale_profile(profile: Profile, t: float) -> Profile:
    """Self-similar transport ``u(t, x) = t^(-1/alpha) u(1, x t^(-1/alpha))`` of a ``t = 1`` profile.

    The samples are unchanged up to the factor; the grid is stretched.
    """
    if not t > 0:
        raise DomainError("t must be positive")
    a = _kernel(profile).alpha
    s = t ** (1.0 / a)
    grid = Grid1D(profile.grid.L * s, profile.grid.n)
    tail = profile.tail
    if isinstance(tail, KernelTail):
        tail = tail.dilated(s)
    elif tail is not None:
        base = profile.tail
        tail = lambda y: base(np.asarray(y) / s) / s  # noqa: E731
    return Profile(grid, profile.values / s, {**profile.meta, "t": float(t) * _time(profile)}, tail)


def decay_check(profile: Profile, eps_levels: Sequence[float]) -> list[float]:
    """Smallest grid radius ``R`` with ``|u(x)| <= eps`` for every ``|x| > R``, per level.

    Levels at or above ``sup|u|`` give ``R = 0``.  Raises :class:`DomainError`
    if some level is not reached inside the grid.
    """
    if len(eps_levels) == 0:
        raise DomainError("no eps levels given")
    ax = np.abs(profile.x)
    order = np.argsort(ax, kind="stable")
    au = np.abs(profile.values)[order]
    outer_sup = np.maximum.accumulate(au[::-1])[::-1]    # sup over |x| >= ax[order][i]
    radii = []
    for eps in eps_levels:
        if not eps > 0:
            raise DomainError("eps levels must be positive")
        if eps >= outer_sup[0]:
            radii.append(0.0)
            continue
        if outer_sup[-1] > eps:
            raise DomainError(f"|u| stays above {eps:.3e} up to the grid edge; enlarge the grid")
        # first sorted index from which everything further out is <= eps
        i = int(np.argmax(outer_sup <= eps))
        radii.append(float(ax[order][i - 1]))
    return radii


def gradient_ratio_sup(kernel: KernelParams, radius: float = 1e3, points: int = 20001) -> tuple[float, float]:
    """``sup_y |p'(1, y)| / p(1, y)`` and its location (``d = 1``).

    A dense sweep of ``[0, radius]`` is polished by a bounded scalar search.
    Beyond the sweep the ratio decays like ``(1 + alpha) / |y|``, so the
    supremum is attained inside it.
    """
    if kernel.d != 1:
        raise DomainError("the gradient ratio is computed in d = 1")
    y = np.concatenate([np.linspace(0.0, 20.0, points // 2), np.geomspace(20.0, radius, points - points // 2)])
    ratio = np.abs(gradient(kernel, 1.0, y)) / density(kernel, 1.0, y)
    i = int(np.argmax(ratio))
    lo, hi = y[max(i - 1, 0)], y[min(i + 1, y.size - 1)]

    def f(s):
        return -float(np.abs(gradient(kernel, 1.0, s)) / density(kernel, 1.0, s))

    res = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    if -res.fun > ratio[i]:
        return float(-res.fun), float(res.x)
    return float(ratio[i]), float(y[i])


def estimate_C1(kernel: KernelParams, b: float, radius: float = 1e3) -> float:
    """``alpha |b| sup_y |p'(1, y)| / p(1, y)``: the constant in ``|drift term| <= C1 h``.

    Scaling makes ``|p'(tau, y)| <= tau^(-1/alpha) (C1 / (alpha |b|)) p(tau, y)``
    for every ``tau``.  A relative margin of ``1e-12`` covers rounding in the
    ratio itself.
    """
    if b == 0:
        return 0.0
    sup, _ = gradient_ratio_sup(kernel, radius)
    return kernel.alpha * abs(b) * sup * (1.0 + 1e-12)


def gradient_bound_check(profile: Profile) -> float:
    """``sup |u'(x)| / p(t, x)`` over the grid, ``u'`` by second-order central differences."""
    du = np.gradient(profile.values, profile.grid.h)
    return float(np.max(np.abs(du) / density(_kernel(profile), _time(profile), profile.x)))


# ---------------------------------------------------------------------------
# the Duhamel correction and the lower bound


@dataclass
class LowerBoundReport:
    """Where the drift correction ``I`` drops below ``(M/2) p`` and what ``u`` does beyond."""

    radius: float
    lower_margin: float
    passed: bool
    details: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


def duhamel_correction(profile: Profile) -> np.ndarray:
    """``I(x) = alpha b int_0^1 int p'(1 - r^alpha, x - r w) |u|^q u(w) dw dr``, so that ``Phi(u) = M p - I``."""
    return DuhamelMap(solver_config(profile)).correction(profile.values)


def _last_violation(x: np.ndarray, bad: np.ndarray) -> float:
    return float(np.abs(x[bad]).max()) if bad.any() else 0.0


def lower_bound_replay(profile: Profile, tol: float = 1e-3, fit_range: tuple[float, float] = (50.0, 200.0)
                       ) -> LowerBoundReport:
    """Radius beyond which ``|I| <= (M/2) p(1, .)`` and the margin of ``u - (M/2) p`` there.

    Also records the far-field decay of ``I / p``: the log-log slope over
    ``fit_range`` and ``x I(x) / p(1, x)`` at the grid edges, whose limit is
    ``-alpha^2 b int |u|^q u``.
    """
    cfg = solver_config(profile)
    x, u = profile.x, profile.values
    p = density(cfg.kernel, 1.0, x)
    I = duhamel_correction(profile)
    half = 0.5 * cfg.M * p
    radius = _last_violation(x, np.abs(I) > half)
    beyond = np.abs(x) > radius
    margin = float(np.min(u[beyond] - half[beyond])) if beyond.any() else 0.0
    details: dict[str, Any] = {"tolerance": tol, "sup_u": float(u.max())}
    if cfg.b != 0:
        ax = np.abs(x)
        fit = (ax >= fit_range[0]) & (ax <= fit_range[1])
        ratio = np.abs(I) / p
        if fit.any() and np.all(ratio[fit] > 0):
            details["slope"] = float(np.polyfit(np.log(ax[fit]), np.log(ratio[fit]), 1)[0])
            details["slope_fit_range"] = list(fit_range)
        G = np.abs(u) ** cfg.q * u
        details["far_field_limit"] = float(-cfg.kernel.alpha ** 2 * cfg.b * profile.grid.h * G.sum())
        details["edge_x_ratio"] = [float(x[0] * I[0] / p[0]), float(x[-1] * I[-1] / p[-1])]
    return LowerBoundReport(radius, margin, bool(margin >= -tol * u.max()), details)


# ---------------------------------------------------------------------------
# replay of the iteration in the upper-bound proof


@dataclass
class ProofReplayReport:
    """Constants and margins of the replayed upper bound ``u <= (M p + C1 h~_R) / (1 - eta)``."""

    eta: float
    R: float
    C1_hat: float
    C0_hat: float
    bound_margin: float
    lower_margin: float
    C2: float = 0.0
    C3_hat: float = 0.0
    threshold: float = np.inf
    passed: bool = False
    partial_sums: list[dict[str, Any]] = field(default_factory=list)
    details: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


@lru_cache(maxsize=16)
def measured_C3(alpha: float, beta: float = 0.5) -> float:
    """Supremum of the ``H H~ / H~`` composition ratio over the default sweep (cached)."""
    return hh_bracket(FunctionalParams(KernelParams(1, alpha), beta=beta), spot=None).estimated_constant


def proof_replay(profile: Profile, eta: float = 0.5, beta: float = 0.5, tol: float = 1e-3,
                 C3: float | None = None, nodes: int = 64, partial: Sequence[int] = (1, 2, 3)
                 ) -> ProofReplayReport:
    """Rebuild the upper-bound argument on a computed profile.

    With ``C0 = C1 max(C2, C3)``, ``R`` is the smallest grid radius with
    ``|u| <= (eta / C0)^(1/q)`` outside it.  The closed-form bound
    ``B = (M p + C1 h~_R) / (1 - eta)`` is checked pointwise, together with
    the finite sums
    ``B_n = sum_{k<=n} eta^k (M p + C1 h~_R) + eta^(n+1) H~_R``
    of the iteration, whose distance to ``B`` is ``eta^(n+1) |H~_R - B|`` and
    therefore shrinks with ``n`` at every point.
    """
    if not 0.0 < eta < 1.0:
        raise DomainError("eta must lie in (0, 1)")
    _check_sign(profile)
    cfg = solver_config(profile)
    kernel, M = cfg.kernel, cfg.M
    x, u = profile.x, profile.values
    p = density(kernel, 1.0, x)
    scale = float(u.max())
    C1 = estimate_C1(kernel, cfg.b)
    C2 = closed_form_C2(kernel.alpha)
    C3 = measured_C3(kernel.alpha, beta) if C3 is None else float(C3)
    C0 = C1 * max(C2, C3)
    lower = lower_bound_replay(profile, tol)
    if C1 == 0.0:
        bound = M * p / (1.0 - eta)
        margin = float(np.min(bound - u))
        return ProofReplayReport(eta, 0.0, 0.0, 0.0, margin, lower.lower_margin, C2, C3, np.inf,
                                 bool(margin >= -tol * scale and lower.passed),
                                 details={"lower_radius": lower.radius, "tolerance": tol})
    threshold = (eta / C0) ** (1.0 / cfg.q)
    R = decay_check(profile, [threshold])[0]
    fp = FunctionalParams(kernel, beta=beta, R=max(R, profile.grid.h))
    h_tilde, H_tilde = h_functionals(fp, profile, nodes=nodes)
    h, H = h_tilde.values, H_tilde.values
    base = M * p + C1 * h
    bound = base / (1.0 - eta)
    margin = float(np.min(bound - u))
    sums, previous = [], None
    for n in partial:
        s_n = (1.0 - eta ** (n + 1)) / (1.0 - eta)
        B_n = s_n * base + eta ** (n + 1) * H
        gap = np.abs(B_n - bound)
        entry = {"n": int(n), "margin": float(np.min(B_n - u)), "sup_distance_to_limit": float(gap.max()),
                 "decreasing_fraction": None, "distance_shrinks": None}
        if previous is not None:
            entry["decreasing_fraction"] = float(np.mean(B_n <= previous[0]))
            entry["distance_shrinks"] = bool(np.all(gap <= previous[1]))
        sums.append(entry)
        previous = (B_n, gap)
    shrinking = all(e["distance_shrinks"] in (None, True) for e in sums)
    passed = margin >= -tol * scale and lower.passed and shrinking
    return ProofReplayReport(
        eta, float(R), C1, C0, margin, lower.lower_margin, C2, C3, float(threshold), bool(passed), sums,
        details={"beta": beta, "tolerance": tol, "sup_u": scale, "lower_radius": lower.radius,
                 "sup_h_tilde_R": float(h.max()), "sup_H_tilde_R": float(H.max()),
                 "argmin_margin": float(x[np.argmin(bound - u)])})


# ---------------------------------------------------------------------------
# self-similarity


def self_similarity_error(u1: Profile, u_t: Profile, window: float = 50.0) -> float:
    """Sup-relative distance between ``u(1, .)`` and ``t^(1/alpha) u(t, x t^(1/alpha))`` on ``|x| <= window``.

    ``u_t`` is interpolated (cubic spline) at the stretched points.
    """
    a = _kernel(u1).alpha
    t = _time(u_t) / _time(u1)
    s = t ** (1.0 / a)
    x = u1.x
    sel = (np.abs(x) <= window) & (x * s >= u_t.x[0]) & (x * s <= u_t.x[-1])
    back = s * CubicSpline(u_t.x, u_t.values)(x[sel] * s)
    return float(np.max(np.abs(back - u1.values[sel])) / np.max(np.abs(u1.values)))


def lp_scaling(profiles: Mapping[float, Profile], ps: Sequence[float] = (1.0, 2.0, np.inf)) -> dict[str, Any]:
    """Scaled norms ``||u(t)||_p t^((1 - 1/p)/alpha)`` per time and their relative spread per ``p``."""
    if not profiles:
        raise DomainError("no profiles given")
    a = _kernel(next(iter(profiles.values()))).alpha
    table: dict[str, Any] = {}
    for p in ps:
        expo = (1.0 - (0.0 if np.isinf(p) else 1.0 / p)) / a
        scaled = {float(t): prof.lp_norm(p) * t ** expo for t, prof in sorted(profiles.items())}
        vals = np.array(list(scaled.values()))
        key = "inf" if np.isinf(p) else f"{p:g}"
        table[key] = {"scaled_norms": scaled, "spread": float((vals.max() - vals.min()) / vals.mean())}
    return table
