import numpy as np
import pytest

from conftest import SMALL, small_config
from fractal_burgers.convolution import KernelTail
from fractal_burgers.errors import DomainError
from fractal_burgers.grid import Grid1D, Profile
from fractal_burgers.kernel import KernelParams, density, gradient
from fractal_burgers.verify import (decay_check, duhamel_correction, estimate_C1, gradient_bound_check,
                                    gradient_ratio_sup, lower_bound_replay, lp_scaling, measured_C3,
                                    proof_replay, ratio_report, rescale_profile, self_similarity_error,
                                    solver_config)


def kernel_profile(alpha=1.5, M=1.0, t=1.0, grid=SMALL):
    params = KernelParams(1, alpha)
    meta = {"alpha": alpha, "d": 1, "M": M, "b": 0.0, "t": t}
    return Profile(grid, M * density(params, t, grid.x), meta, KernelTail(alpha, [(M, t, 0)]))


def test_ratio_report_linear_profile(linear_profile):
    rep = ratio_report(linear_profile)
    assert rep.ratio_inf == pytest.approx(2.0, rel=1e-9)
    assert rep.ratio_sup == pytest.approx(2.0, rel=1e-9)
    assert rep.tail_band[0] == pytest.approx(2.0, rel=1e-9) and rep.passed
    with pytest.raises(DomainError):
        ratio_report(linear_profile, tail_radius=1e3)


def test_ratio_report_nonlinear(picard_m2):
    rep = ratio_report(picard_m2)
    assert rep.passed
    assert rep.ratio_inf < 2.0 < rep.ratio_sup
    # drift to the right: the largest excess over M p sits at x > 0
    assert rep.arg_sup > 0


def test_negative_profiles_rejected():
    prof = kernel_profile()
    bad = prof.with_values(prof.values - 0.01)
    with pytest.raises(DomainError):
        ratio_report(bad)
    with pytest.raises(DomainError):
        solver_config(Profile(SMALL, prof.values, {"alpha": 1.5}))
    with pytest.raises(DomainError):
        solver_config(kernel_profile(t=2.0))
    assert solver_config(rescale_profile(kernel_profile(t=2.0), 0.5)).M == 1.0


def test_rescale_leaves_ratios_invariant(picard_m2):
    base = ratio_report(picard_m2)
    for t in (0.5, 4.0):
        moved = rescale_profile(picard_m2, t)
        assert moved.meta["t"] == t
        assert moved.mass() == pytest.approx(picard_m2.mass(), rel=1e-9)
        s = t ** (1 / 1.5)
        rep = ratio_report(moved, window=50 * s, tail_radius=30 * s)
        assert rep.ratio_inf == pytest.approx(base.ratio_inf, rel=1e-6)
        assert rep.ratio_sup == pytest.approx(base.ratio_sup, rel=1e-6)
    with pytest.raises(DomainError):
        rescale_profile(picard_m2, 0.0)
    # the analytic tail is carried along exactly
    moved = rescale_profile(picard_m2, 4.0)
    assert isinstance(moved.tail, KernelTail)
    y = np.array([300.0, -500.0])
    s = 4.0 ** (1 / 1.5)
    assert np.allclose(moved.tail(y), picard_m2.tail(y / s) / s, rtol=1e-12)


def test_decay_check():
    prof = kernel_profile()
    top = float(prof.values.max())
    assert decay_check(prof, [top, 2 * top]) == [0.0, 0.0]
    eps = np.logspace(-2, -4, 6)
    radii = np.array(decay_check(prof, eps))
    assert np.all(np.diff(radii) > 0)
    # p(1, x) ~ c |x|^(-1-alpha): R(eps) ~ eps^(-1/(1+alpha))
    slope = np.polyfit(np.log(eps), np.log(radii), 1)[0]
    assert slope == pytest.approx(-1 / 2.5, rel=0.1)
    with pytest.raises(DomainError):
        decay_check(prof, [1e-9])
    with pytest.raises(DomainError):
        decay_check(prof, [])


def test_gradient_ratio_and_C1():
    k = KernelParams(1, 1.5)
    sup, where = gradient_ratio_sup(k)
    # independent holdout sweep
    y = np.linspace(-50, 50, 10001)
    holdout = np.max(np.abs(gradient(k, 1.0, y)) / density(k, 1.0, y))
    assert holdout <= sup * (1 + 1e-9)
    assert holdout == pytest.approx(sup, rel=1e-4)
    assert abs(float(gradient(k, 1.0, where)) / float(density(k, 1.0, where))) == pytest.approx(sup, rel=1e-9)
    c1 = estimate_C1(k, 1.0)
    assert c1 >= 1.5 * sup
    assert estimate_C1(k, -3.0) == pytest.approx(3 * c1, rel=1e-12)
    assert estimate_C1(k, 0.0) == 0.0


def test_gradient_bound_for_kernel():
    prof = kernel_profile(M=2.0)
    sup, _ = gradient_ratio_sup(KernelParams(1, 1.5))
    assert gradient_bound_check(prof) == pytest.approx(2.0 * sup, rel=1e-2)


def test_gradient_bound_finite(picard_m2):
    g = gradient_bound_check(picard_m2)
    assert np.isfinite(g) and g > 0


def test_lower_bound_replay(picard_m2):
    rep = lower_bound_replay(picard_m2)
    assert rep.passed and rep.radius < SMALL.L
    d = rep.details
    # dipole far field: |I| / p decays like 1/|x| and x I / p tends to -alpha^2 b int |u|^q u
    assert d["slope"] == pytest.approx(-1.0, abs=0.1)
    for edge in d["edge_x_ratio"]:
        assert edge == pytest.approx(d["far_field_limit"], rel=0.1)
    I = duhamel_correction(picard_m2)
    assert SMALL.h * I.sum() == pytest.approx(0.0, abs=1e-6)


def test_lower_bound_trivial_without_drift(linear_profile):
    rep = lower_bound_replay(linear_profile)
    assert rep.radius == 0.0 and rep.passed
    assert rep.lower_margin == pytest.approx(float(linear_profile.values.min()) / 2, rel=1e-9)


def test_proof_replay(picard_m2):
    C3 = measured_C3(1.5)
    assert C3 == measured_C3(1.5)
    rep = proof_replay(picard_m2, C3=C3)
    assert rep.passed and rep.bound_margin > 0
    assert rep.C0_hat == pytest.approx(rep.C1_hat * max(rep.C2, rep.C3_hat))
    assert rep.threshold == pytest.approx((0.5 / rep.C0_hat) ** (1 / (1.5 - 1.0)))
    dists = [e["sup_distance_to_limit"] for e in rep.partial_sums]
    assert dists == sorted(dists, reverse=True)
    assert all(e["distance_shrinks"] in (None, True) for e in rep.partial_sums)
    # a larger eta raises the threshold, so the radius cannot grow
    radii = [proof_replay(picard_m2, eta=e, C3=C3, partial=()).R for e in (0.3, 0.5, 0.8)]
    assert radii == sorted(radii, reverse=True)
    with pytest.raises(DomainError):
        proof_replay(picard_m2, eta=1.0, C3=C3)


def test_proof_replay_without_drift(linear_profile):
    rep = proof_replay(linear_profile, C3=1.0)
    assert rep.passed and rep.C1_hat == 0.0
    assert rep.bound_margin == pytest.approx(float(np.min(linear_profile.values)), rel=1e-9)


def test_self_similarity_of_kernel():
    grid = Grid1D(128.0, 2 ** 13)
    u1 = kernel_profile(grid=grid)
    u2 = kernel_profile(t=2.0, grid=grid)
    assert self_similarity_error(u1, u2) < 1e-6
    assert self_similarity_error(u1, kernel_profile(M=1.1, t=2.0, grid=grid)) > 0.05


def test_lp_scaling_of_kernel():
    grid = Grid1D(256.0, 2 ** 14)
    table = lp_scaling({t: kernel_profile(t=t, grid=grid) for t in (0.5, 1.0, 2.0, 4.0)})
    for key in ("1", "2", "inf"):
        assert table[key]["spread"] < 1e-6
    with pytest.raises(DomainError):
        lp_scaling({})
