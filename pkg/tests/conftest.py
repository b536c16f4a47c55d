import pytest

from fractal_burgers.grid import Grid1D
from fractal_burgers.kernel import KernelParams
from fractal_burgers.solver import SolverConfig, evolve_spectral, picard_solve

# small domain: agrees with the default grid to ~1e-4 near the origin, seconds per solve
SMALL = Grid1D(64.0, 2 ** 12)


def small_config(alpha=1.5, M=2.0, b=1.0, **kw):
    return SolverConfig(KernelParams(1, alpha), M, b, grid=kw.pop("grid", SMALL), **kw)


@pytest.fixture(scope="session")
def picard_m2():
    """Picard profile for alpha = 1.5, M = 2, b = 1 on the small grid."""
    return picard_solve(small_config()).profile


@pytest.fixture(scope="session")
def spectral_m2():
    return evolve_spectral(small_config(), t_end=1.0)[1.0]


@pytest.fixture(scope="session")
def picard_small_mass():
    return picard_solve(small_config(M=0.5)).profile


@pytest.fixture(scope="session")
def linear_profile():
    """b = 0: the exact profile M p(1, .)."""
    return picard_solve(small_config(M=2.0, b=0.0)).profile


def pytest_terminal_summary(terminalreporter):
    import sys

    lines = getattr(sys.modules.get("test_acceptance"), "SUMMARY", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
