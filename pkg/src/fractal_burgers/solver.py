"""Source-solution profile ``u_M(1, .)`` in d = 1, computed two independent ways.

With ``G(u) = |u|^q u`` and ``tau = 1 - r^alpha`` the profile is the fixed point of

    Phi(u)(x) = M p(1, x) - alpha b int_0^1 int p'(tau, x - r w) G(u(w)) dw dr,

which is the Duhamel formula of ``u_t = -(-Delta)^(alpha/2) u - b (G(u))_x``
rewritten with the self-similar scaling.  :func:`picard_solve` iterates
``Phi``; :func:`evolve_spectral` integrates the equation itself from
``M p(t0, .)``.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np
from scipy.optimize import NoConvergence, newton_krylov

from .convolution import KernelTail, ray_integral, ray_rule
from .errors import ConvergenceError, DomainError, MassAnomaly, StepRejected
from .grid import Grid1D, Profile
from .kernel import KernelParams, density, gradient

MASS_TOLERANCE = 1e-3
_MIN_RELAXATION = 1.0 / 64
_GROWTH_SWEEPS = 8      # consecutive growing updates at minimal damping that count as divergence


@dataclass(frozen=True)
class SolverConfig:
    """Parameters of one source-solution computation (d = 1).

    ``relaxation=None`` selects 1.0 for ``M <= 1`` and 0.5 otherwise.
    """

    kernel: KernelParams
    M: float
    b: float = 1.0
    grid: Grid1D = field(default_factory=Grid1D)
    picard_tol: float = 1e-10
    picard_max_iter: int = 400
    relaxation: float | None = None
    evolution_t0: float = 1e-3
    evolution_steps: int = 512
    ray_nodes: int = 64
    newton_fallback: bool = True
    divergence_factor: float = 4.0

    def __post_init__(self):
        if self.kernel.d != 1:
            raise DomainError("the profile solvers work in d = 1 only")
        if not (self.M > 0 and np.isfinite(self.M)):
            raise DomainError(f"mass M must be positive, got {self.M}")
        if not np.isfinite(self.b):
            raise DomainError("drift b must be finite")
        if not self.picard_tol > 0:
            raise DomainError("picard_tol must be positive")
        if self.picard_max_iter < 1:
            raise DomainError("picard_max_iter must be at least 1")
        if self.relaxation is not None and not 0.0 < self.relaxation <= 1.0:
            raise DomainError(f"relaxation must lie in (0, 1], got {self.relaxation}")
        if not 0.0 < self.evolution_t0 < 1.0:
            raise DomainError("evolution_t0 must lie in (0, 1)")
        if not self.divergence_factor > 1.0:
            raise DomainError("divergence_factor must exceed 1")
        if self.evolution_steps < 1:
            raise DomainError("evolution_steps must be at least 1")

    @property
    def q(self) -> float:
        return self.kernel.q

    @property
    def omega(self) -> float:
        if self.relaxation is not None:
            return float(self.relaxation)
        return 1.0 if self.M <= 1.0 else 0.5

    def to_dict(self) -> dict:
        return {"d": self.kernel.d, "alpha": self.kernel.alpha, "M": self.M, "b": self.b,
                "grid": self.grid.to_dict(), "picard_tol": self.picard_tol,
                "picard_max_iter": self.picard_max_iter, "relaxation": self.omega,
                "evolution_t0": self.evolution_t0, "evolution_steps": self.evolution_steps,
                "ray_nodes": self.ray_nodes, "newton_fallback": self.newton_fallback,
                "divergence_factor": self.divergence_factor}


def signed_power(u: np.ndarray, q: float) -> np.ndarray:
    """``|u|^q u``."""
    return np.abs(u) ** q * u


def fit_tail(alpha: float, grid: Grid1D, values: np.ndarray, t: float = 1.0) -> KernelTail:
    """Tail model ``a p(t, y) - c p'(t, y)`` matched to the two outermost samples.

    Far out, a source profile is a multiple of the kernel plus a dipole
    correction from the drift; both edge values are reproduced exactly.
    """
    params = KernelParams(1, alpha)
    xs = np.array([grid.x[0], grid.x[-1]])
    A = np.column_stack([density(params, t, xs), -gradient(params, t, xs)])
    a, c = np.linalg.solve(A, np.array([values[0], values[-1]]))
    return KernelTail(alpha, [(a, t, 0), (-c, t, 1)])


def _with_tail(cfg_alpha: float, grid: Grid1D, values: np.ndarray, meta: dict, t: float = 1.0) -> Profile:
    return Profile(grid, values, meta, tail=fit_tail(cfg_alpha, grid, values, t))


class DuhamelMap:
    """``Phi`` on a grid with a fixed radial rule; reusable across iterations."""

    def __init__(self, cfg: SolverConfig, grid: Grid1D | None = None):
        self.cfg = cfg
        self.grid = grid or cfg.grid
        self.params = cfg.kernel
        self.r, self.w, self.gaps = ray_rule(cfg.kernel.alpha, cfg.ray_nodes, left=0.0)
        self.linear = cfg.M * density(cfg.kernel, 1.0, self.grid.x)

    def correction(self, u: np.ndarray) -> np.ndarray:
        """``alpha b int_0^1 int p'(tau, x - r w) G(u(w)) dw dr`` at the grid points."""
        if self.cfg.b == 0.0:
            return np.zeros_like(u)
        G = Profile(self.grid, signed_power(u, self.cfg.q))
        return self.params.alpha * self.cfg.b * ray_integral(self.params, G, self.r, self.w, order=1,
                                                             gaps=self.gaps)

    def __call__(self, u: np.ndarray) -> np.ndarray:
        return self.linear - self.correction(u)


@dataclass
class PicardResult:
    profile: Profile
    trace: list[dict[str, Any]]
    converged: bool


def _check_mass(profile: Profile, M: float) -> float:
    mass = profile.mass()
    drift = abs(mass - M) / M
    if drift > MASS_TOLERANCE:
        raise MassAnomaly(f"profile mass {mass:.8g} deviates from M = {M} by {drift:.2e}")
    return mass


def _newton_krylov(phi: DuhamelMap, u0: np.ndarray, cfg: SolverConfig, trace: list) -> np.ndarray:
    """Solve ``u = Phi(u)`` by Jacobian-free Newton-Krylov, logging into ``trace``."""
    scale = float(np.max(np.abs(phi.linear)))
    offset = len(trace)

    def log(u, f):
        trace.append({"iteration": len(trace) + 1, "update": float(np.max(np.abs(f)) / np.max(np.abs(u))),
                      "relaxation": None, "method": "newton-krylov"})

    try:
        return newton_krylov(lambda u: u - phi(u), u0, f_tol=cfg.picard_tol * scale, method="lgmres",
                             maxiter=max(cfg.picard_max_iter - offset, 1), callback=log)
    except (NoConvergence, ValueError, FloatingPointError) as exc:
        err = ConvergenceError(f"Newton-Krylov fallback failed: {exc}")
        err.trace = trace
        raise err from None


def picard_solve(cfg: SolverConfig) -> PicardResult:
    """Damped Picard iteration ``u <- (1 - w) u + w Phi(u)`` from ``u0 = M p(1, .)``.

    Stops when ``sup|u_new - u| / sup|u| < picard_tol``.  The damping ``w`` is
    halved whenever the update size grows.  For large ``M`` the linearisation
    of ``Phi`` can have an eigenvalue above 1, which no damping repairs; once
    the update exceeds ``divergence_factor`` times the smallest update seen,
    keeps growing at the smallest damping, or loses finiteness, the solve restarts from ``M p(1, .)``
    with Jacobian-free Newton-Krylov on ``u - Phi(u)``.  The switch is recorded
    in the trace and in ``meta["method"]``; ``newton_fallback=False`` turns it
    off.

    Raises :class:`ConvergenceError` (with ``.trace``) after
    ``picard_max_iter`` sweeps and :class:`MassAnomaly` if the converged
    profile loses more than 0.1% of its mass.
    """
    phi = DuhamelMap(cfg)
    u = phi.linear.copy()
    omega = cfg.omega
    trace: list[dict[str, Any]] = []
    previous = best = np.inf
    growing = 0
    method = "picard"
    start = time.perf_counter()
    converged = False
    for it in range(1, cfg.picard_max_iter + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            new = (1.0 - omega) * u + omega * phi(u)
            change = float(np.max(np.abs(new - u)) / np.max(np.abs(u)))
        trace.append({"iteration": it, "update": change, "relaxation": omega, "method": "picard"})
        growing = growing + 1 if change > previous else 0
        stalled = omega <= _MIN_RELAXATION and growing >= _GROWTH_SWEEPS
        if not np.isfinite(change) or change > cfg.divergence_factor * best or stalled:
            if not cfg.newton_fallback:
                err = ConvergenceError(f"Picard iteration diverged at sweep {it} (update {change:.3e})")
                err.trace = trace
                raise err
            method = "newton-krylov"
            u = _newton_krylov(phi, phi.linear.copy(), cfg, trace)
            converged = True
            break
        u = new
        if change < cfg.picard_tol:
            converged = True
            break
        if change > previous and omega > _MIN_RELAXATION:
            omega *= 0.5
        previous = change
        best = min(best, change)
    if not converged:
        err = ConvergenceError(f"Picard iteration did not reach {cfg.picard_tol:g} in "
                               f"{cfg.picard_max_iter} sweeps (last update {trace[-1]['update']:.3e})")
        err.trace = trace
        raise err
    meta = {"producer": "picard", "method": method, "M": cfg.M, "b": cfg.b, "alpha": cfg.kernel.alpha,
            "d": 1, "t": 1.0, "iterations": len(trace), "seconds": time.perf_counter() - start}
    profile = _with_tail(cfg.kernel.alpha, cfg.grid, u, meta)
    profile.meta["mass"] = _check_mass(profile, cfg.M)
    profile.meta["first_moment"] = float(cfg.grid.h * np.sum(cfg.grid.x * u))
    return PicardResult(profile, trace, True)


def duhamel_residual(profile: Profile, cfg: SolverConfig) -> float:
    """``sup|u - Phi(u)| / sup|u|`` on the profile's own grid."""
    phi = DuhamelMap(cfg, profile.grid)
    u = profile.values
    return float(np.max(np.abs(u - phi(u))) / np.max(np.abs(u)))


# ---------------------------------------------------------------------------
# pseudo-spectral evolution


def _phi_functions(z: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``exp(z)``, ``(e^z - 1)/z`` and ``(e^z - 1 - z)/z^2`` for ``z <= 0``, stable near 0."""
    ez = np.exp(z)
    small = np.abs(z) < 1e-3
    zs = np.where(small, 1.0, z)
    phi1 = np.where(small, 1.0 + z / 2 + z ** 2 / 6 + z ** 3 / 24, np.expm1(zs) / zs)
    phi2 = np.where(small, 0.5 + z / 6 + z ** 2 / 24 + z ** 3 / 120, (np.expm1(zs) - zs) / zs ** 2)
    return ez, phi1, phi2


class _SpectralFlux:
    """``-b d/dx G(M p(t) + v)`` in Fourier space with 2x padded dealiasing."""

    def __init__(self, cfg: SolverConfig, grid: Grid1D):
        self.cfg = cfg
        self.grid = grid
        self.n = grid.n
        self.xi = 2.0 * np.pi * np.fft.rfftfreq(self.n, d=grid.h)
        self.fine_x = (np.arange(2 * self.n) - self.n) * (grid.h / 2.0)

    def __call__(self, v_hat: np.ndarray, t: float) -> np.ndarray:
        n = self.n
        padded = np.zeros(n + 1, dtype=complex)
        padded[: v_hat.size] = v_hat
        if n % 2 == 0:
            padded[n // 2] *= 0.5          # split the Nyquist mode symmetrically
        v_fine = np.fft.irfft(padded, n=2 * n) * 2.0
        # grid index 0 is x = -L; irfft places it at index 0 on the fine grid too
        u_fine = self.cfg.M * density(self.cfg.kernel, t, self.fine_x) + v_fine
        G_hat = np.fft.rfft(signed_power(u_fine, self.cfg.q))[: v_hat.size] / 2.0
        return -self.cfg.b * 1j * self.xi * G_hat


def _time_levels(t0: float, steps: int, t_end: float, checkpoints) -> np.ndarray:
    ratio = (1.0 / t0) ** (1.0 / steps)
    count = int(np.ceil(np.log(t_end / t0) / np.log(ratio) - 1e-9))
    levels = t0 * ratio ** np.arange(count + 1)
    exact = np.array([t_end] + [c for c in checkpoints if t0 < c < t_end], dtype=float)
    near = np.any(np.abs(levels[:, None] - exact[None, :]) <= 1e-9 * exact[None, :], axis=1)
    levels = levels[(levels < t_end) & ~near]
    return np.unique(np.concatenate([[t0], levels, exact]))


def evolve_spectral(cfg: SolverConfig, t_end: float = 1.0, checkpoints=(),
                    grid: Grid1D | None = None) -> dict[float, Profile]:
    """Integrate the equation from ``u(t0) = M p(t0, .)`` to ``t_end``.

    The deviation ``v = u - M p(t, .)`` is evolved on the periodic grid with a
    second-order exponential time-differencing scheme; the linear part is
    exact.  Steps are geometric in ``t`` (``evolution_steps`` per ``[t0, 1]``).
    A step that grows ``sup|u|`` by more than 10% is retried as two half steps
    (up to six times) before :class:`StepRejected` is raised.

    Returns profiles at ``t_end`` and every requested checkpoint, keyed by time.
    """
    grid = grid or cfg.grid
    t0 = cfg.evolution_t0
    if not t_end > t0:
        raise DomainError("t_end must exceed evolution_t0")
    a = cfg.kernel.alpha
    flux = _SpectralFlux(cfg, grid)
    lam = -flux.xi ** a
    x = grid.x
    levels = _time_levels(t0, cfg.evolution_steps, t_end, checkpoints)
    wanted = set(float(c) for c in checkpoints) | {float(t_end)}
    v_hat = np.zeros(grid.n // 2 + 1, dtype=complex)
    out: dict[float, Profile] = {}
    start = time.perf_counter()
    rejected = 0

    def sup_u(vh, t):
        return np.max(np.abs(cfg.M * density(cfg.kernel, t, x) + np.fft.irfft(vh, n=grid.n)))

    def step(vh, t, dt):
        E, p1, p2 = _phi_functions(lam * dt)
        N0 = flux(vh, t)
        a_hat = E * vh + dt * p1 * N0
        N1 = flux(a_hat, t + dt)
        return a_hat + dt * p2 * (N1 - N0)

    def advance(vh, t, dt, depth=0):
        nonlocal rejected
        new = step(vh, t, dt)
        if sup_u(new, t + dt) <= 1.1 * sup_u(vh, t) or cfg.b == 0.0:
            return new
        if depth >= 6:
            raise StepRejected(f"sup|u| grew by more than 10% in a step of size {dt:.3e} at t = {t:.4g}")
        rejected += 1
        half = advance(vh, t, 0.5 * dt, depth + 1)
        return advance(half, t + 0.5 * dt, 0.5 * dt, depth + 1)

    for t, t_next in zip(levels[:-1], levels[1:]):
        if cfg.b != 0.0:
            v_hat = advance(v_hat, t, t_next - t)
        hit = [c for c in wanted if abs(t_next - c) <= 1e-12 * c]
        if hit:
            t_next = hit[0]  # report at the requested time, not the accumulated float
            v = np.fft.irfft(v_hat, n=grid.n)
            energy = np.abs(v_hat) ** 2
            top = energy[int(2 * energy.size / 3):].sum() / max(energy.sum(), 1e-300)
            if top > 1e-8:
                warnings.warn(f"spectral tail holds {top:.1e} of the energy at t = {t_next:.4g}; "
                              "the grid may be too coarse", RuntimeWarning, stacklevel=2)
            u = cfg.M * density(cfg.kernel, t_next, x) + v
            meta = {"producer": "spectral", "M": cfg.M, "b": cfg.b, "alpha": a, "d": 1, "t": float(t_next),
                    "t0": t0, "steps": int(np.searchsorted(levels, t_next)), "rejected_steps": rejected,
                    "spectral_tail_fraction": float(top), "seconds": time.perf_counter() - start}
            out[float(t_next)] = _with_tail(a, grid, u, meta, t=float(t_next))
    for prof in out.values():
        prof.meta["mass"] = prof.mass()
    key = min(out, key=lambda c: abs(c - 1.0))
    if abs(key - 1.0) < 1e-12:
        _check_mass(out[key], cfg.M)
    return out


def evolve_spectral_extrapolated(cfg: SolverConfig, t_end: float = 1.0, checkpoints=(),
                                 grid: Grid1D | None = None) -> dict[float, Profile]:
    """Richardson extrapolation of :func:`evolve_spectral` in the start time.

    Starting from ``M p(t0, .)`` instead of the point mass leaves an error
    proportional to ``t0^(1/alpha)``; runs at ``t0`` and ``t0/2`` are combined
    to cancel it.  ``meta["t0_bias"]`` is the sup-relative distance of the
    plain ``t0`` run from the extrapolated profile.
    """
    grid = grid or cfg.grid
    coarse = evolve_spectral(cfg, t_end, checkpoints, grid)
    fine = evolve_spectral(with_config(cfg, evolution_t0=0.5 * cfg.evolution_t0), t_end, checkpoints, grid)
    k = 2.0 ** (-1.0 / cfg.kernel.alpha)
    out = {}
    for t, c in coarse.items():
        f = fine[t]
        values = (f.values - k * c.values) / (1.0 - k)
        bias = float(np.max(np.abs(c.values - values)) / np.max(np.abs(values)))
        meta = {**c.meta, "producer": "spectral-extrapolated", "t0_pair": [cfg.evolution_t0, 0.5 * cfg.evolution_t0],
                "t0_bias": bias, "seconds": c.meta["seconds"] + f.meta["seconds"],
                "rejected_steps": c.meta["rejected_steps"] + f.meta["rejected_steps"]}
        prof = _with_tail(cfg.kernel.alpha, grid, values, meta, t=t)
        prof.meta["mass"] = prof.mass()
        out[t] = prof
    return out


def with_config(cfg: SolverConfig, **changes) -> SolverConfig:
    """Copy of ``cfg`` with fields replaced."""
    return replace(cfg, **changes)
