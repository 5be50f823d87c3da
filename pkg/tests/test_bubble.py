import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from yamabe_blowup import bubble as b


def test_values_at_simple_points():
    assert b.bubble(np.zeros(8), 8) == 1.0
    y = np.zeros(8)
    y[-1] = 1.0
    assert b.bubble(y, 8) == pytest.approx(0.015625, rel=1e-15)
    y = np.zeros(8)
    y[0] = 1.0
    assert b.bubble(y, 8) == pytest.approx(0.125, rel=1e-15)


def test_family():
    rng = np.random.default_rng(3)
    y = np.abs(rng.standard_normal((100, 8)))
    assert np.array_equal(b.bubble_family(y, 1.0, 8), b.bubble(y, 8))
    assert b.bubble_family(np.zeros(8), 2.0, 8) == pytest.approx(0.125, rel=1e-15)
    for d in (1e-3, 0.3, 10.0):
        lhs = b.bubble_family(d * y, d, 8)
        rhs = d ** -3 * b.bubble(y, 8)
        assert np.max(np.abs(lhs / rhs - 1)) < 1e-14


def test_kernel_values():
    assert b.kernel(8, np.zeros(8), 8) == pytest.approx(3.0)
    assert b.kernel(1, np.zeros(8), 8) == 0.0
    y = np.zeros(8)
    y[-1] = 1.0
    assert abs(b.kernel(8, y, 8)) < 1e-16


def test_kernel_normal_matches_symbolic():
    n = 8
    t = sp.symbols("t")
    jn = sp.Rational(n - 2, 2) * (1 + t) ** (-(n - 1)) * (1 - t)
    for tv in (0.0, 0.5, 2.0):
        y = np.zeros(n)
        y[-1] = tv
        assert b.kernel(n, y, n) == pytest.approx(float(jn.subs(t, tv)), rel=1e-13, abs=1e-16)


@pytest.mark.parametrize("n", [5, 8, 10])
def test_residuals_vanish(n):
    rng = np.random.default_rng(n)
    y = rng.standard_normal((1000, n)) * 2
    y[:, -1] = np.abs(y[:, -1])
    for r, s in zip(b.residuals(y, n), b.residual_scales(y, n)):
        assert np.max(np.abs(r) / s) < 1e-12


def test_gradient_against_finite_differences():
    rng = np.random.default_rng(0)
    y = np.abs(rng.standard_normal((20, 8)))
    fd = b.finite_difference_gradient(lambda p: b.bubble(p, 8), y)
    assert np.allclose(fd, b.bubble_gradient(y, 8), rtol=1e-7, atol=1e-10)


@pytest.mark.parametrize("n", [8, 10])
def test_decay(n):
    for tau, s in b.decay_exponents(n).items():
        assert abs(s - (2 - tau - n)) < 0.2


def test_domain_errors():
    with pytest.raises(b.DomainError):
        b.bubble(np.array([0.0, -1.0]), 2)
    with pytest.raises(b.DomainError):
        b.bubble(np.array([0.0, 0.0, -1.0]), 3)
    with pytest.raises(b.DomainError):
        b.bubble_family(np.zeros(8), 0.0, 8)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=7, max_size=7), st.floats(0, 5), st.floats(0.01, 10))
def test_scaling_property(z, t, d):
    y = np.array(z + [t])
    assert b.bubble_family(d * y, d, 8) == pytest.approx(d ** -3 * b.bubble(y, 8), rel=1e-13)
