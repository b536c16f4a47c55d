import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fractal_burgers.convolution import (Dilation, KernelTail, convolution_plan, grad_stable_convolve, ray_integral,
                                         ray_rule, ray_times, stable_convolve)
from fractal_burgers.errors import DomainError, WrapAroundError
from fractal_burgers.functionals import closed_form_C2
from fractal_burgers.grid import Grid1D, Profile
from fractal_burgers.kernel import KernelParams, density, gradient

GRID = Grid1D(256.0, 2 ** 15)
SMALL = Grid1D(64.0, 2 ** 12)


def kernel_profile(params, grid, s, generic=True):
    """Samples of p(s, .) with a tail that is either generic (quadrature path) or exact."""
    tail = (lambda y: density(params, s, y)) if generic else KernelTail(params.alpha, [(1.0, s, 0)])
    return Profile(grid, density(params, s, grid.x), tail=tail)


def test_grid_validation():
    with pytest.raises(DomainError):
        Grid1D(10.0, 1000)
    with pytest.raises(DomainError):
        Grid1D(-1.0, 1024)
    g = Grid1D(4.0, 16)
    assert g.x[g.n // 2] == 0.0 and g.h == 0.5
    with pytest.raises(DomainError):
        Profile(g, np.full(16, np.nan))


@pytest.mark.parametrize("alpha", [1.25, 1.5, 1.75])
@pytest.mark.parametrize("s,t", [(0.5, 0.5), (0.2, 1.3)])
def test_chapman_kolmogorov(alpha, s, t):
    params = KernelParams(1, alpha)
    out = stable_convolve(params, t, kernel_profile(params, GRID, s))
    x = GRID.x
    inside = np.abs(x) <= 128
    ref = density(params, s + t, x)
    assert np.max(np.abs(out.values - ref)[inside] / ref[inside]) < 1e-6


def test_gradient_chapman_kolmogorov_and_fd():
    params = KernelParams(1, 1.5)
    f = kernel_profile(params, GRID, 0.5)
    g = grad_stable_convolve(params, 0.5, f)
    x = GRID.x
    inside = np.abs(x) <= 128
    ref = gradient(params, 1.0, x)
    assert np.max(np.abs(g.values - ref)[inside]) < 1e-8 * np.max(np.abs(ref))
    # fourth-order central differences of the plain convolution
    c = stable_convolve(params, 0.5, f).values
    fd = np.zeros_like(c)
    fd[2:-2] = (c[:-4] - 8 * c[1:-3] + 8 * c[3:-1] - c[4:]) / (12 * GRID.h)
    mid = np.abs(x) <= 20
    assert np.max(np.abs(fd - g.values)[mid]) < 1e-5 * np.max(np.abs(g.values))


def test_gradient_output_divergence_form_and_parity():
    params = KernelParams(1, 1.5)
    x = SMALL.x
    even = Profile(SMALL, np.exp(-x ** 2))
    g = grad_stable_convolve(params, 0.7, even).values
    mass = SMALL.h * even.values.sum()
    assert abs(SMALL.h * g.sum()) < 1e-8 * mass
    # x_j -> -x_j maps index j to n - j (index 0, x = -L, has no mirror)
    assert np.allclose(g[1:], -g[1:][::-1], atol=1e-14)


def test_constant_function():
    params = KernelParams(1, 1.5)
    one = Profile(SMALL, np.ones(SMALL.n), tail=lambda y: np.ones_like(np.asarray(y, float)))
    out = stable_convolve(params, 1.0, one).values
    # the far tail of a non-decaying input is integrated by a fixed quadrature
    assert np.max(np.abs(out - 1.0)) < 1e-5


def test_narrow_gaussian_approximates_kernel():
    params = KernelParams(1, 1.5)
    grid = Grid1D(64.0, 2 ** 17)
    x = grid.x
    w = 1e-3
    g = np.exp(-0.5 * (x / w) ** 2) / (np.sqrt(2 * np.pi) * w)
    out = stable_convolve(params, 1.0, Profile(grid, g)).values
    ref = density(params, 1.0, x)
    inside = np.abs(x) <= 32
    assert np.max(np.abs(out - ref)[inside]) < 1e-4 * ref.max()


@settings(max_examples=10, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), shift=st.floats(-10, 10))
def test_linearity(a, b, shift):
    params = KernelParams(1, 1.25)
    x = SMALL.x
    f = Profile(SMALL, np.exp(-(x - shift) ** 2))
    g = Profile(SMALL, 1.0 / (1.0 + x ** 4))
    lhs = stable_convolve(params, 0.4, Profile(SMALL, a * f.values + b * g.values)).values
    rhs = a * stable_convolve(params, 0.4, f).values + b * stable_convolve(params, 0.4, g).values
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * (abs(a) + abs(b) + 1.0)


def test_wraparound_budget():
    plan = convolution_plan(1.5, SMALL)
    with pytest.raises(WrapAroundError):
        plan.multiplier(2.0 * plan.max_time())


def test_multiplier_cached_read_only():
    plan = convolution_plan(1.5, SMALL)
    m = plan.multiplier(0.3)
    assert m is plan.multiplier(0.3)
    with pytest.raises(ValueError):
        m[0] = 0.0


def test_kernel_tail_exact_convolution():
    tail = KernelTail(1.5, [(2.0, 0.5, 0), (-0.3, 0.5, 1)])
    x = np.linspace(-5, 5, 11)
    params = KernelParams(1, 1.5)
    assert np.allclose(tail.convolved(0.5, 0, x), 2.0 * density(params, 1.0, x) - 0.3 * gradient(params, 1.0, x))
    d = tail.dilated(2.0)
    # f(y/r)/r for the density part is p(r^alpha s, y)
    assert np.allclose(d(x)[:1], (tail(x / 2.0) / 2.0)[:1])
    assert np.allclose(d(x), tail(x / 2.0) / 2.0, rtol=1e-12)


def test_dilation_averages_preserve_mass():
    x = SMALL.x
    G = Profile(SMALL, np.exp(-x ** 2 / 8))
    for r in (0.3, 0.9):
        avg = Dilation(G).averages(r)
        assert SMALL.h * avg.sum() == pytest.approx(SMALL.h * G.values.sum(), rel=1e-10)


def test_ray_rule():
    for a in (1.25, 1.5, 1.75):
        r, w, gaps = ray_rule(a, 64)
        assert np.all((r >= 0) & (r <= 1)) and np.all(gaps > 0)
        # graded maps are not polynomial-exact; 32 nodes per half give ~1e-8
        assert np.sum(w) == pytest.approx(1.0, rel=1e-7)
        assert np.sum(w * r ** 3) == pytest.approx(0.25, rel=1e-7)
        tau = ray_times(a, r, gaps)
        assert np.all(tau > 0)
        assert np.sum(w * tau ** (-1 / a)) == pytest.approx(closed_form_C2(a), rel=1e-8)


@pytest.mark.parametrize("alpha", [1.25, 1.5, 1.75])
def test_ray_integral_collapses_to_c2(alpha):
    # int_0^1 tau^(-1/alpha) int p(tau, x - r w) p(1, w) dw dr = C2 p(1, x)
    params = KernelParams(1, alpha)
    r, w, gaps = ray_rule(alpha, 64)
    weights = w * ray_times(alpha, r, gaps) ** (-1.0 / alpha)
    out = ray_integral(params, kernel_profile(params, GRID, 1.0, generic=False), r, weights, gaps=gaps)
    x = GRID.x
    inside = np.abs(x) <= 128
    ref = closed_form_C2(alpha) * density(params, 1.0, x)
    assert np.max(np.abs(out - ref)[inside] / ref[inside]) < 1e-8
