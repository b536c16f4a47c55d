import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fractal_burgers.errors import DomainError, QuadratureError
from fractal_burgers.quadrature import (QuadratureSpec, gauss_kronrod, gauss_legendre_rule, integrate,
                                        singular_quad)


def test_gauss_kronrod_polynomial_exact():
    val, err = gauss_kronrod(lambda x: 3 * x ** 2 - x + 1, -1.0, 2.0)
    assert val == pytest.approx(9.0 - 1.5 + 3.0, rel=1e-14)
    assert err < 1e-12


def test_gauss_kronrod_reversed_interval():
    a, _ = gauss_kronrod(np.exp, 0.0, 1.0)
    b, _ = gauss_kronrod(np.exp, 1.0, 0.0)
    assert a == pytest.approx(np.e - 1, rel=1e-14)
    assert b == -a


def test_gauss_kronrod_rejects_infinite_interval():
    with pytest.raises(DomainError):
        gauss_kronrod(np.exp, 0.0, np.inf)


def test_depth_exhaustion_raises():
    # a non-integrable spike declared as smooth cannot be resolved
    with pytest.raises(QuadratureError):
        gauss_kronrod(lambda x: np.abs(x - 0.3) ** -0.99, 0.0, 1.0, rel_tol=1e-14, max_depth=6)


def test_spec_validation():
    with pytest.raises(DomainError):
        QuadratureSpec(endpoint_exponents=(1.0, 0.0))
    with pytest.raises(DomainError):
        QuadratureSpec(rel_tol=0.0)


@pytest.mark.parametrize("a,b", [(0.5, 0.0), (0.0, 0.6), (0.3, 0.7), (0.9, 0.2)])
def test_beta_function(a, b):
    # int_0^1 r^-a (1-r)^-b dr = B(1-a, 1-b)
    exact = float(mpmath.beta(1 - a, 1 - b))
    spec = QuadratureSpec(endpoint_exponents=(a, b), rel_tol=1e-12)
    got = singular_quad(lambda r, d0, d1: d0 ** -a * d1 ** -b, spec, distances=True)
    assert got == pytest.approx(exact, rel=1e-10)


@settings(max_examples=25, deadline=None)
@given(a=st.floats(0.0, 0.95), b=st.floats(0.0, 0.95))
def test_beta_property(a, b):
    exact = float(mpmath.beta(1 - a, 1 - b))
    got = integrate(lambda r, d0, d1: d0 ** -a * d1 ** -b, 0.0, 1.0, left=a, right=b,
                    rel_tol=1e-10, distances=True)
    assert got == pytest.approx(exact, rel=1e-8)


def test_split_point_and_general_interval():
    # int_2^5 (r-2)^-1/2 (5-r)^-1/3 dr = 3^(1/6) B(1/2, 2/3)
    exact = 3 ** (1 - 0.5 - 1 / 3) * float(mpmath.beta(0.5, 2 / 3))
    got = integrate(lambda r, d0, d1: d0 ** -0.5 * d1 ** (-1 / 3), 2.0, 5.0, left=0.5, right=1 / 3,
                    split=2.5, distances=True, rel_tol=1e-12)
    assert got == pytest.approx(exact, rel=1e-10)


def test_graded_rule_integrates_endpoint_singularity():
    r, w, gaps = gauss_legendre_rule(40, right=2 / 3, gaps=True)
    assert np.all(np.diff(r) >= 0)
    assert np.allclose(1.0 - r, gaps, atol=1e-15)
    assert np.sum(w * gaps ** (-2 / 3)) == pytest.approx(3.0, rel=1e-12)
    r, w = gauss_legendre_rule(12, 1.0, 3.0)
    assert np.sum(w * r ** 5) == pytest.approx((3 ** 6 - 1) / 6, rel=1e-13)
