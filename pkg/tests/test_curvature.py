import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import special_ortho_group

from yamabe_blowup import curvature as cv


def test_validate_zero_and_violation():
    assert cv.validate(cv.CurvatureData.zero(8)).passed
    R = np.zeros((7,) * 4)
    R[0, 1, 0, 2] = 1.0
    rep = cv.validate(cv.CurvatureData(8, R, np.zeros((7, 7))))
    assert not rep.passed
    assert "antisym_ik" in rep.violations()


@pytest.mark.parametrize("seed", range(100))
def test_random_admissible_passes_brute_force_scan(seed):
    c = cv.random_admissible(seed, 1.0, 8)
    R, m = c.rbar, c.m
    worst = 0.0
    for i, k, j, l in itertools.product(range(m), repeat=4):
        worst = max(worst, abs(R[i, k, j, l] + R[k, i, j, l]), abs(R[i, k, j, l] + R[i, k, l, j]),
                    abs(R[i, k, j, l] - R[j, l, i, k]),
                    abs(R[i, k, j, l] + R[i, j, l, k] + R[i, l, k, j]))
    assert worst < 1e-13
    assert cv.validate(c).passed


def test_random_admissible_deterministic_and_traceless():
    a, b = cv.random_admissible(5), cv.random_admissible(5)
    assert a.content_hash() == b.content_hash()
    assert np.abs(cv.ricci(a.rbar)).max() < 1e-13
    assert abs(np.trace(a.rnn)) < 1e-13


def test_norms():
    z = cv.CurvatureData.zero(8)
    assert cv.weyl_norm_sq(z) == 0 and cv.rnn_norm_sq(z) == 0
    c = cv.random_admissible(2, 1.0, 8)
    s = 1.7
    assert cv.weyl_norm_sq(c.scaled(s)) == pytest.approx(s * s * cv.weyl_norm_sq(c), rel=1e-13)
    assert cv.rnn_norm_sq(c.scaled(s)) == pytest.approx(s * s * cv.rnn_norm_sq(c), rel=1e-13)


def test_weyl_norm_single_plane_block():
    m = 7
    R = np.zeros((m,) * 4)
    R[0, 1, 0, 1] = R[1, 0, 1, 0] = 1.0
    R[0, 1, 1, 0] = R[1, 0, 0, 1] = -1.0
    c = cv.CurvatureData(8, R, np.zeros((m, m)))
    total = sum(R[idx] ** 2 for idx in itertools.product(range(m), repeat=4))
    assert cv.weyl_norm_sq(c) == pytest.approx(total)


def test_metric_inverse_basics():
    c = cv.random_admissible(0, 1.0, 8, higher_order=True)
    assert np.allclose(cv.metric_inverse(c, np.zeros(8)), np.eye(8))
    y = np.random.default_rng(0).random((10, 8))
    assert np.allclose(cv.metric_inverse(cv.CurvatureData.zero(8), y), np.eye(8))
    assert np.all(cv.metric_det(y) == 1.0)


def test_quadratic_term_brute_force():
    c = cv.random_admissible(4, 1.0, 8)
    rng = np.random.default_rng(1)
    y = rng.standard_normal((5, 8))
    y[:, -1] = np.abs(y[:, -1])
    g2 = cv.metric_orders(c, y)[2]
    m = 7
    for p in range(5):
        z, t = y[p, :m], y[p, -1]
        ref = np.zeros((m, m))
        for i, j, k, l in itertools.product(range(m), repeat=4):
            ref[i, j] += c.rbar[i, k, j, l] * z[k] * z[l] / 3.0
        ref += t * t * c.rnn
        assert np.abs(g2[p] - ref).max() < 1e-13


def test_mean_curvature_model():
    assert cv.mean_curvature_model(np.zeros(8))[()] == 0
    y = np.random.default_rng(0).random((20, 8))
    ratio = cv.mean_curvature_model(y, 2.5) / np.linalg.norm(y, axis=1) ** 3
    assert np.allclose(ratio, 2.5)


def test_rhs_special_cases():
    rng = np.random.default_rng(2)
    y = rng.random((50, 8))
    assert np.all(cv.rhs_corrector(cv.CurvatureData.zero(8), y) == 0)
    c = cv.random_admissible(3, 1.0, 8)
    axis = np.zeros((10, 8))
    axis[:, -1] = np.linspace(0, 3, 10)
    assert np.abs(cv.rhs_corrector(c.without_rbar(), axis)).max() < 1e-15
    rbar_only = cv.CurvatureData(8, c.rbar, np.zeros((7, 7)))
    assert np.abs(cv.rhs_corrector(rbar_only, y)).max() < 1e-14


def test_sector_decomposition():
    assert cv.sector_decompose(cv.CurvatureData.zero(8)).is_empty
    c = cv.random_admissible(6, 1.0, 8)
    dec = cv.sector_decompose(c.without_rbar())
    assert len(dec.sectors) == 1
    assert dec.sectors[0].profile == "normal_aniso"
    assert np.allclose(dec.sectors[0].T, c.rnn)
    y = np.random.default_rng(0).random((100, 8))
    assert np.abs(cv.sector_decompose(c).evaluate(y) - cv.rhs_corrector(c, y)).max() < 1e-12


def test_rotation_invariance_and_roundtrip(tmp_path):
    c = cv.random_admissible(8, 1.0, 8, higher_order=True)
    Q = special_ortho_group.rvs(7, random_state=0)
    r = c.rotated(Q)
    assert cv.weyl_norm_sq(r) == pytest.approx(cv.weyl_norm_sq(c), rel=1e-12)
    assert cv.validate(r).passed
    cv.save_curvature(c, tmp_path / "c.json")
    assert cv.load_curvature(tmp_path / "c.json").content_hash() == c.content_hash()


def test_spd_radius():
    c = cv.random_admissible(0, 1.0, 8, higher_order=True)
    rad = cv.spd_radius(c)
    assert rad > 0
    rng = np.random.default_rng(0)
    y = rng.standard_normal((300, 8))
    y[:, -1] = np.abs(y[:, -1])
    y *= (0.99 * rad / np.linalg.norm(y, axis=1))[:, None]
    assert np.linalg.eigvalsh(cv.metric_inverse(c, y)).min() > 0


def test_metric_divergence_matches_finite_differences():
    c = cv.random_admissible(9, 1.0, 8, higher_order=True)
    y = np.random.default_rng(3).random((4, 8)) * 0.5
    h = 1e-5
    div = sum(cv.metric_divergence(c, y).values())
    total = lambda p: sum(cv.metric_orders(c, p).values())
    fd = np.zeros_like(div)
    for i in range(7):
        e = np.zeros(8)
        e[i] = h
        fd += (total(y + e)[:, i, :] - total(y - e)[:, i, :]) / (2 * h)
    assert np.abs(fd - div).max() < 1e-8


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 10_000), st.floats(-3, 3), st.floats(-3, 3))
def test_rhs_linearity(s1, s2, a, b):
    c1, c2 = cv.random_admissible(s1), cv.random_admissible(s2)
    y = np.random.default_rng(s1).random((20, 8))
    lhs = cv.rhs_corrector(c1.scaled(a) + c2.scaled(b), y)
    rhs = a * cv.rhs_corrector(c1, y) + b * cv.rhs_corrector(c2, y)
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-13)


def test_random_admissible_rejects_small_n():
    with pytest.raises(ValueError):
        cv.random_admissible(0, 1.0, 4)
