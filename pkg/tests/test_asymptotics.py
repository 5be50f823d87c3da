import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from yamabe_blowup import asymptotics as asy
from yamabe_blowup import corrector as cor
from yamabe_blowup import curvature as cv
from yamabe_blowup.bubble import DomainError
from yamabe_blowup.fitting import log_correction_test, loglog_fit

FAST = asy.RemainderSettings(n_angular=128, n_radial=32, replicates=2)


def test_exponents_at_zero():
    q, r = asy.nittka_exponents(8, 0.0)
    assert q == pytest.approx(8 / 5, rel=1e-15)
    assert r == 0.0
    assert asy.s_eps(8, 0.0) == pytest.approx(7 / 3, rel=1e-15)


@settings(max_examples=200, deadline=None)
@given(st.integers(5, 40), st.floats(0.0, 0.5))
def test_identities_exact(n, eps):
    d1, d2 = asy.exponent_identity_defects(n, eps)
    assert abs(d1) < 1e-14 * max(1.0, asy.s_eps(n, eps))
    assert abs(d2) < 1e-14 * 10
    q, r = asy.nittka_exponents(n, eps)
    assert 2 * n / (n + 2) - 1e-15 <= q < n / 2
    assert r >= 0


def test_exponents_reject_negative_eps():
    with pytest.raises(DomainError):
        asy.nittka_exponents(8, -1e-3)


def test_pow_remainder_series_and_direct_agree():
    p = 8 / 6
    s = np.array([9.9e-4, 1.01e-3])
    exact = (1 + s) ** p - 1 - p * s
    assert np.allclose(asy._pow_remainder(s, p), exact, rtol=1e-9)


def test_zero_curvature_terms_vanish():
    z = cv.CurvatureData.zero(8)
    q = asy.remainder_quantities(z, cor.solve_corrector(z), 0.1, 1e-4, FAST).values
    assert q["Q_h"] == 0.0 and q["Q_Delta"] == 0.0 and q["Q_bdry"] == 0.0
    assert q["Q_pert"] > 0


def test_nonnegative_and_monotone(curv8, sol8):
    prev = None
    for s in (0.5, 1.0, 2.0):
        cs = curv8.scaled(s)
        q = asy.remainder_quantities(cs, cor.solve_corrector(cs), 0.1, 1e-4, FAST).values
        assert all(v >= 0 for v in q.values())
        if prev:
            assert all(q[k] >= prev[k] for k in q)
        prev = q


def test_linear_in_curvature_scale(curv10, sol10):
    a = asy.remainder_quantities(curv10, sol10, 0.1, 1e-4, FAST).values
    c2 = curv10.scaled(2.0)
    b = asy.remainder_quantities(c2, cor.solve_corrector(c2), 0.1, 1e-4, FAST).values
    assert b["Q_h"] / a["Q_h"] == pytest.approx(2.0, rel=0.01)
    assert b["Q_Delta"] / a["Q_Delta"] == pytest.approx(2.0, rel=0.05)


def test_h_term_is_delta_cubed_at_n10(curv10, sol10):
    ds = np.geomspace(1e-1, 1e-3, 5)
    q = [asy.remainder_quantities(curv10, sol10, d, d ** 4, FAST).values["Q_h"] for d in ds]
    assert abs(loglog_fit(ds, q).slope - 3) < 0.15


def test_perturbation_term_has_log_modulation(curv10, sol10):
    eps = np.geomspace(1e-2, 1e-8, 7)
    q = [asy.remainder_quantities(curv10, sol10, e ** 0.25, e, FAST).values["Q_pert"] for e in eps]
    nested = log_correction_test(eps, q)
    assert nested.significant()
    assert abs(nested.corrected_slope - 1) < 0.1


def test_radius_beyond_domain(curv8, sol8):
    with pytest.raises(DomainError):
        asy.remainder_quantities(curv8, sol8, 1e-4, 1e-16, FAST)


def test_study_validates_grid(curv8, sol8):
    with pytest.raises(ValueError):
        asy.scaling_study(curv8, sol8, 1.0, [1e-6, 1e-2, 1e-4])
    with pytest.raises(ValueError):
        asy.scaling_study(curv8, sol8, 1.0, [1e-2, 1e-3, 1e-4])


def test_truncation_tail_control(curv10, sol10):
    grid = np.geomspace(1e-5, 1e-9, 5)
    a = asy.scaling_study(curv10, sol10, 1.0, grid, FAST)
    b = asy.scaling_study(curv10, sol10, 1.0, grid, asy.RemainderSettings(radius=2.0, n_angular=128,
                                                                           n_radial=32, replicates=2))
    assert max(abs(a.slopes[k] - b.slopes[k]) for k in a.slopes) < 0.05


def test_gap_arithmetic():
    assert asy.gap_bound(1e-4, 0.0) == 0.0
    e = 1e-6
    assert (e ** 0.75) ** 2 / e == pytest.approx(1e-3, rel=1e-12)
    ok, rows = asy.verify_gap(10.0 ** -np.arange(2, 9), 10, phi_norm=lambda e: e ** 0.75)
    assert ok
    assert rows[-1].ratio < rows[0].ratio
    with pytest.raises(ValueError):
        asy.gap_bound(1e-3, -1.0)
