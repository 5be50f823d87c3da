import numpy as np
import pytest
from scipy.stats import special_ortho_group

from yamabe_blowup import checks
from yamabe_blowup import corrector as cor
from yamabe_blowup import curvature as cv
from yamabe_blowup.bubble import DomainError


def _points(n, count=50, scale=3.0, seed=0):
    y = np.random.default_rng(seed).random((count, n)) * scale
    return y


def test_zero_curvature():
    sol = cor.solve_corrector(cv.CurvatureData.zero(8))
    assert sol.is_zero
    assert np.all(sol.eval(_points(8)) == 0)
    assert cor.v_lap_v(sol) == 0.0
    assert sol.residuals["kernel_defect_max"] == 0.0


def test_family_scaling(sol8):
    y = _points(8)
    assert np.array_equal(sol8.eval_family(y, 1.0), sol8.eval(y))
    d = 0.2
    lhs = sol8.eval_family(d * y, d)
    rhs = d ** -3 * sol8.eval(y)
    assert np.max(np.abs(lhs - rhs) / np.abs(rhs).max()) < 1e-12


def test_linearity(curv8, sol8):
    twice = cor.solve_corrector(curv8.scaled(2.0))
    y = _points(8)
    assert np.allclose(twice.eval(y), 2 * sol8.eval(y), rtol=0, atol=1e-8 * np.abs(sol8.eval(y)).max())


def test_rnn_only_properties():
    c = cv.random_admissible(11, 1.0, 8).without_rbar()
    sol = cor.solve_corrector(c)
    rep = cor.check_properties(sol)
    assert rep.v_lap_v < 0
    assert abs(rep.uvq_integral) < 1e-4 * rep.v_norm
    assert abs(rep.decay_exponents[0] + 4) < 0.3
    assert abs(rep.v_lap_v_by_parts / rep.v_lap_v - 1) < 0.02


def test_refinement_order():
    rich = cor.richardson_order(8, cor.RadialGrid())
    assert abs(rich["orders"][-1] - 2.0) < 0.3


def test_manufactured_solution_second_order():
    errs, orders = cor.manufactured_errors(8)
    assert errs[0] > errs[1] > errs[2]
    assert abs(orders[-1] - 2.0) < 0.3


@pytest.mark.parametrize("n", [8, 10])
def test_sector_reduction_oracle(n):
    errs = checks.sector_fd_errors(n)
    assert errs[0] > errs[1] > errs[2]
    assert errs[-1] < 0.02
    assert 3.0 < errs[1] / errs[2] < 5.0


def test_rotation_invariance_of_energy(curv8, sol8):
    Q = special_ortho_group.rvs(7, random_state=4)
    other = cor.solve_corrector(curv8.rotated(Q))
    assert cor.v_lap_v(other) == pytest.approx(cor.v_lap_v(sol8), rel=1e-10)


def test_projection_is_noop(sol8):
    assert sol8.residuals["kernel_defect_max"] < sol8.tol
    assert np.all(sol8.applied_coeffs == 0)


def test_derivatives_against_finite_differences(sol8):
    y = _points(8, 5, 2.0, 1) + np.array([0] * 7 + [0.5])
    v, g, H = sol8.derivatives(y)
    h = 1e-4
    for k in range(8):
        e = np.zeros(8)
        e[k] = h
        fd = (sol8.eval(y + e) - sol8.eval(y - e)) / (2 * h)
        assert np.allclose(fd, g[:, k], rtol=1e-3, atol=1e-6)


def test_non_admissible_rejected():
    c = cv.random_admissible(0, 1.0, 8)
    bad = cv.CurvatureData(8, c.rbar, c.rnn + np.eye(7))
    with pytest.raises(DomainError):
        cor.solve_corrector(bad)


def test_grid_validation():
    with pytest.raises(ValueError):
        cor.RadialGrid(20, 20, 1000.0, 1000.0, 8.0, 8.0)
    with pytest.raises(ValueError):
        cor.solve_corrector(cv.CurvatureData.zero(8), tol=0.0)


def test_outside_domain(sol8):
    y = np.zeros((1, 8))
    y[0, 0] = 5000.0
    with pytest.raises(DomainError):
        sol8.eval(y)
    assert sol8.eval(y, outside="zero")[0] == 0.0


def test_cache_roundtrip_and_corruption(tmp_path, curv8, sol8):
    key = cor.cache_key(curv8, sol8.grid, sol8.tol)
    path = tmp_path / "c.npz"
    cor.save_solution(sol8, path, key)
    back = cor.load_solution(path, key)
    y = _points(8)
    assert np.array_equal(back.eval(y), sol8.eval(y))
    with pytest.raises(cor.CacheCorruption):
        cor.load_solution(path, "0" * 64)
    raw = bytearray(path.read_bytes())
    raw[-10] ^= 0xFF
    path.write_bytes(bytes(raw))
    with pytest.raises(cor.CacheCorruption):
        cor.load_solution(path, key)
