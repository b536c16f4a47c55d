import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate as si

from fractal_burgers.convolution import KernelTail
from fractal_burgers.errors import DomainError
from fractal_burgers.functionals import (FunctionalParams, H_kernel, HH_composition, Htilde_kernel,
                                         LemmaReport, ball_mass_bracket, closed_form_C2, h_functionals,
                                         hh_bracket, tech_bracket, tech_integral)
from fractal_burgers.grid import Grid1D, Profile
from fractal_burgers.kernel import KernelParams, density

SMALL = Grid1D(64.0, 2 ** 12)


def fp(alpha=1.5, beta=0.5, R=50.0):
    return FunctionalParams(KernelParams(1, alpha), beta, R)


def mp_endpoint_quad(f, lo, hi, e_lo, e_hi):
    """mpmath quad of f(x, x - lo, hi - x) over [lo, hi] with |f| ~ dist^-e at the endpoints.

    Power substitutions make the integrand bounded; plain tanh-sinh truncates
    strong singularities at the working precision.
    """
    mid = (lo + hi) / 2
    k0, k1 = 1 / (1 - mpmath.mpf(e_lo)), 1 / (1 - mpmath.mpf(e_hi))
    left = mpmath.quad(lambda u: k0 * u ** (k0 - 1) * f(lo + u ** k0, u ** k0, hi - lo - u ** k0), [0, (mid - lo) ** (1 / k0)])
    right = mpmath.quad(lambda u: k1 * u ** (k1 - 1) * f(hi - u ** k1, hi - lo - u ** k1, u ** k1), [0, (hi - mid) ** (1 / k1)])
    return left + right


def mp_tech(alpha, beta, v):
    with mpmath.workdps(40):
        a, b, v = mpmath.mpf(alpha), mpmath.mpf(beta), mpmath.mpf(v)
        def f(r, d0, d1):
            above = v ** a * mpmath.expm1(a * mpmath.log1p(d0 / v))
            below = -mpmath.expm1(a * mpmath.log1p(-d1))
            return r ** -b * below ** (-1 / a) * above ** (-1 / a)

        return mp_endpoint_quad(f, v, mpmath.mpf(1), 1 / a, 1 / a)


def test_closed_form_C2_anchor():
    assert closed_form_C2(1.5) == pytest.approx(2.41840, abs=5e-6)
    # direct integral of (1 - s^alpha)^(-1/alpha)
    for a in (1.25, 1.75):
        with mpmath.workdps(40):
            am = mpmath.mpf(a)
            ref = mp_endpoint_quad(lambda s, d0, d1: (-mpmath.expm1(am * mpmath.log1p(-d1))) ** (-1 / am), 0, mpmath.mpf(1), 0, 1 / am)
        assert closed_form_C2(a) == pytest.approx(float(ref), rel=1e-12)


def test_params_validation():
    with pytest.raises(DomainError):
        fp(beta=1.0)
    with pytest.raises(DomainError):
        fp(R=0.0)
    with pytest.raises(DomainError):
        LemmaReport("x", 2.0, 1.0, None, {}, True)


@pytest.mark.parametrize("alpha,beta", [(1.5, 0.5), (1.25, 0.3), (1.75, 0.0)])
@pytest.mark.parametrize("v", [1e-3, 0.1, 0.5, 0.95])
def test_tech_integral_against_mpmath(alpha, beta, v):
    assert tech_integral(alpha, beta, v) == pytest.approx(float(mp_tech(alpha, beta, v)), rel=1e-8)


def test_tech_integral_domain():
    with pytest.raises(DomainError):
        tech_integral(1.5, 0.5, 0.0)
    with pytest.raises(DomainError):
        tech_integral(2.0, 0.5, 0.5)


def test_diagonal_is_infinite():
    assert H_kernel(fp(), 0.0, 0.0) == np.inf
    assert Htilde_kernel(fp(), 1.0, 1.05, diagonal_tol=0.1) == np.inf
    assert HH_composition(fp(), 3.0, 3.0) == np.inf


def test_Htilde_against_scipy_oracle():
    # w = 0 keeps x - r w = x; the algebraic weight absorbs both endpoint singularities
    a, beta, x = 1.5, 0.5, 2.0
    params = KernelParams(1, a)

    def smooth(r):
        if r >= 1.0:
            return 0.0
        tau = 1.0 - r ** a
        return (tau / (1.0 - r)) ** (-1.0 / a) * float(density(params, tau, x))

    ref, _ = si.quad(smooth, 0.0, 1.0, weight="alg", wvar=(-beta, -1.0 / a), epsabs=0, epsrel=1e-11,
                     limit=200)
    assert Htilde_kernel(fp(a, beta), x, 0.0) == pytest.approx(ref, rel=1e-8)


@settings(max_examples=15, deadline=None)
@given(x=st.floats(-20, 20), w=st.floats(-20, 20))
def test_H_below_Htilde(x, w):
    if abs(x - w) < 1e-3:
        return
    assert 0.0 < H_kernel(fp(), x, w, rel_tol=1e-8) <= Htilde_kernel(fp(), x, w, rel_tol=1e-8) * (1 + 1e-7)


def test_h_functionals_zero_profile():
    h, Ht = h_functionals(fp(), Profile(SMALL, np.zeros(SMALL.n)))
    assert np.all(h.values == 0.0) and np.all(Ht.values == 0.0)


@pytest.mark.parametrize("alpha", [1.25, 1.5, 1.75])
def test_h_functional_whole_line_reproduces_C2(alpha):
    params = KernelParams(1, alpha)
    grid = Grid1D(256.0, 2 ** 15)
    p = Profile(grid, density(params, 1.0, grid.x), tail=KernelTail(alpha, [(1.0, 1.0, 0)]))
    h, Ht = h_functionals(FunctionalParams(params, 0.5, np.inf), p, power=1.0, tilde=False)
    inside = np.abs(grid.x) <= 128
    ref = closed_form_C2(alpha) * p.values
    assert np.max(np.abs(h.values - ref)[inside] / ref[inside]) < 1e-6
    assert np.all(Ht.values == 0.0)


def test_h_functionals_monotone_in_R():
    params = KernelParams(1, 1.5)
    u = Profile(SMALL, density(params, 1.0, SMALL.x))
    prev_h, prev_H = None, None
    for R in (2.0, 8.0, 32.0):
        h, Ht = h_functionals(FunctionalParams(params, 0.5, R), u)
        if prev_h is not None:
            assert np.all(h.values >= prev_h - 1e-14)
            assert np.all(Ht.values <= prev_H + 1e-14)
        prev_h, prev_H = h.values, Ht.values


@pytest.mark.parametrize("alpha", [1.25, 1.5, 1.75])
def test_tech_bracket(alpha):
    rep = tech_bracket(alpha, 0.5)
    assert rep.passed and 0 < rep.ratio_min <= rep.ratio_max < np.inf
    assert rep.details["weak_bound_sup"] < np.inf
    zero = tech_bracket(alpha, 0.0, vs=np.logspace(-4, -1, 5))
    assert zero.passed and zero.details["growth_factor"] > 2.0


def test_ball_mass_bracket_small_sweep():
    rep = ball_mass_bracket(KernelParams(1, 1.5), times=np.logspace(-3, 3, 4), radii=np.logspace(-3, 3, 4))
    assert rep.passed
    assert 1.0 <= rep.estimated_constant < 10.0
    assert rep.details["refinement_drift"] <= 0.01
    with pytest.raises(DomainError):
        ball_mass_bracket(KernelParams(1, 1.5), times=[])


def test_hh_bracket_reproducible_and_spot_checked():
    f = fp(1.5, 0.5)
    pts = (0.0, 1.0, -5.0)
    a = hh_bracket(f, points=pts, spot=(2.0, 0.0))
    assert a.passed
    assert a.details["spot_relative_difference"] <= 1e-3
    b = hh_bracket(f, points=pts, spot=None)
    assert b.estimated_constant == pytest.approx(a.estimated_constant, rel=1e-6)
    assert np.all(np.isfinite(a.details["ratios"]))
    with pytest.raises(DomainError):
        hh_bracket(f, points=())
