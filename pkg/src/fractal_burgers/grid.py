"""Uniform symmetric grids and sampled profiles (d = 1)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class Grid1D:
    """``n`` points ``x_j = (j - n/2) h`` with ``h = 2L/n``; contains ``x = 0``.

    Every sample represents the cell ``[x_j - h/2, x_j + h/2]``, so the grid
    covers ``[-L - h/2, L - h/2]``.
    """

    L: float = 256.0
    n: int = 2 ** 15

    def __post_init__(self):
        if not self.L > 0:
            raise DomainError("grid half-width L must be positive")
        if self.n < 16 or self.n & (self.n - 1):
            raise DomainError(f"grid size n must be a power of two >= 16, got {self.n}")

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.n

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.n) - self.n // 2) * self.h

    @property
    def lower_edge(self) -> float:
        return -self.L - 0.5 * self.h

    @property
    def upper_edge(self) -> float:
        return self.L - 0.5 * self.h

    def refined(self) -> "Grid1D":
        """Same domain, twice the points."""
        return Grid1D(self.L, 2 * self.n)

    def to_dict(self) -> dict:
        return {"L": self.L, "n": self.n}


@dataclass
class Profile:
    """Samples of a function on a :class:`Grid1D` plus free-form metadata.

    ``tail`` optionally extends the function beyond the grid (a vectorised
    callable of position); mass and norms include its contribution.
    """

    grid: Grid1D
    values: np.ndarray
    meta: dict[str, Any] = field(default_factory=dict)
    tail: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n,):
            raise DomainError(f"profile has {self.values.shape} values for a grid of {self.grid.n}")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("profile values must be finite")

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    def with_values(self, values, **meta) -> "Profile":
        return Profile(self.grid, values, {**self.meta, **meta}, self.tail)

    def tail_integral(self, power: float = 1.0) -> float:
        """``int |f|^power`` outside the grid cells, from the tail model (0 without one)."""
        if self.tail is None:
            return 0.0
        from .quadrature import gauss_kronrod

        total = 0.0
        for edge, sgn in ((self.grid.upper_edge, 1.0), (self.grid.lower_edge, -1.0)):
            def g(u, edge=edge, sgn=sgn):
                y = edge + sgn * u / (1.0 - u)
                return np.abs(self.tail(y)) ** power / (1.0 - u) ** 2

            total += gauss_kronrod(g, 0.0, 1.0, abs_tol=1e-300, rel_tol=1e-10, initial_panels=8)[0]
        return total

    def mass(self) -> float:
        """Grid integral (cell rule) plus the tail-model mass."""
        return float(self.grid.h * self.values.sum() + self.tail_integral(1.0))

    def lp_norm(self, p: float) -> float:
        if np.isinf(p):
            return float(np.max(np.abs(self.values)))
        return float((self.grid.h * np.sum(np.abs(self.values) ** p) + self.tail_integral(p)) ** (1.0 / p))
