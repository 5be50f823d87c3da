import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import gamma

from yamabe_blowup import corrector as cor
from yamabe_blowup import curvature as cv
from yamabe_blowup import reduced_energy as re
from yamabe_blowup.bubble import DomainError

# frozen from the closed forms, cross-checked against quadrature below
FROZEN_N8 = {"I1": 0.253669507901, "I2": -0.585693235557, "I3": 0.710274622123, "I4": 0.0190252}


def test_i1_beta_identity():
    assert re.moment_integrals(8)["I1"] == pytest.approx(np.pi ** 3.5 * gamma(3.5) / gamma(7), rel=1e-14)


@pytest.mark.parametrize("n", [8, 9, 10])
def test_closed_forms_match_quadrature(n):
    mi = re.moment_integrals(n)
    assert mi.agree(1e-8), mi.relative_gaps()


def test_frozen_values_and_signs():
    mi = re.moment_integrals(8)
    for k, v in FROZEN_N8.items():
        assert mi[k] == pytest.approx(v, rel=1e-5)
    assert mi["I1"] > 0 and mi["I3"] > 0 and mi["I4"] > 0
    # ln U <= 0 on the boundary, so the logarithmic moment is negative
    assert mi["I2"] < 0


def test_i4_qmc():
    mean, se = re.i4_qmc(8)
    exact = re.moment_integrals(8)["I4"]
    assert abs(mean / exact - 1) < 1e-4
    assert abs(mean - exact) < 4 * se


def test_constants():
    assert re.const_C(8) > 0
    assert re.const_C(8) == pytest.approx(1.95688, rel=1e-5)
    assert re.const_A(8) == pytest.approx(re.const_A_quadrature(8), rel=1e-12)
    assert re.const_B(8, 0.0) == 0.0


@pytest.mark.parametrize("n", [8, 9, 10, 12])
def test_log_coefficient(n):
    printed = -(n - 2) ** 3 / (16 * (n - 1)) * re.moment_integrals(n)["I1"]
    assert re.b_log_coefficient(n) == pytest.approx(printed, rel=1e-15)
    assert re.log_coefficient_symbolic(n) == pytest.approx(printed, rel=1e-10)
    assert re.log_coefficient_numeric(n) == pytest.approx(printed, rel=1e-10)


def test_b_ratio_tends_to_log_coefficient():
    eps = np.array([1e-20, 1e-40, 1e-80])
    ratio = re.const_B(8, eps) / (eps * np.abs(np.log(eps)))
    gaps = np.abs(ratio - re.b_log_coefficient(8))
    assert np.all(np.diff(gaps) < 0)


def test_phi_zero_and_negative(curv8, sol8):
    z = cv.CurvatureData.zero(8)
    assert re.phi(z, cor.solve_corrector(z)).value == 0.0
    ph = re.phi(curv8, sol8)
    assert ph.value < 0
    assert ph.rnn_term == 0.0


@pytest.mark.parametrize("s", [0.5, 2.0, 3.0])
def test_phi_homogeneity(curv8, sol8, s):
    cs = curv8.scaled(s)
    ratio = re.phi(cs, cor.solve_corrector(cs)).value / re.phi(curv8, sol8).value
    assert ratio == pytest.approx(s * s, rel=1e-8)


def test_phi_rejects_mismatched_solution(curv8, sol8):
    with pytest.raises(ValueError):
        re.phi(curv8.scaled(2.0), sol8)


def test_landscape_shape():
    n, eps = 8, 1e-3
    ph = -0.3
    ls = re.lambda_star(ph, re.const_C(n))
    assert re.reduced_energy_derivative(ls, eps, ph, n) == pytest.approx(0.0, abs=1e-10)
    lam = np.geomspace(0.1, 10, 400)
    d = re.reduced_energy_derivative(lam, eps, ph, n)
    assert np.all(d[lam < ls * 0.999] > 0) and np.all(d[lam > ls * 1.001] < 0)
    small = re.reduced_energy(1.0, 1e-14, ph, n)
    assert small == pytest.approx(re.const_A(n), rel=1e-11)


def test_maximizer_examples():
    C = re.const_C(8)
    mx = re.maximize(-C / 4, 8)
    assert mx.interior and abs(mx.golden - 1) < 1e-6 and mx.closed_form == pytest.approx(1.0, rel=1e-15)
    mx = re.maximize(-C / 4, 8, (2.0, 3.0))
    assert mx.lam == 2.0 and not mx.interior
    with pytest.raises(DomainError):
        re.lambda_star(0.1, C)


@settings(max_examples=60, deadline=None)
@given(st.floats(-50, -1e-3), st.floats(0.01, 100))
def test_argmax_depends_on_ratio_only(ph, s):
    C = re.const_C(8)
    a = re.maximize(ph, 8, (1e-3, 1e3), C)
    b = re.maximize(s * ph, 8, (1e-3, 1e3), s * C)
    assert b.golden == pytest.approx(a.golden, rel=1e-9)
    if a.interior:
        assert abs(a.golden / a.closed_form - 1) < 1e-6


def test_profile(curv8, sol8):
    v0 = sol8.eval(np.zeros((1, 8)))[0]
    for d in (0.1, 0.05):
        prof = re.assemble_profile(d, curv8, sol8)
        assert prof(np.zeros((1, 8)))[0] == pytest.approx(d ** -3 * (1 + d * d * v0), rel=1e-13)
        assert prof.sample_min() > 0
    ds = np.geomspace(0.1, 0.01, 4)
    sups = [re.assemble_profile(d, curv8, sol8).sample_max() for d in ds]
    slope = np.polyfit(np.log(ds), np.log(sups), 1)[0]
    assert abs(slope + 3) < 0.05
