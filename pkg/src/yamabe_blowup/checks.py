"""Property suites, one per module, aggregated by the ``verify`` command.

Each suite returns a list of :class:`Check`; a suite holds exactly the
invariants its module documents.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.stats import special_ortho_group

from . import asymptotics as asy
from . import bubble as bub
from . import corrector as cor
from . import curvature as cv
from . import reduced_energy as re
from .spherical import sobol_sphere, sphere_area


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    value: float
    limit: float
    passed: bool

    def row(self) -> dict:
        return {"suite": self.suite, "name": self.name, "value": float(self.value),
                "limit": float(self.limit), "status": "PASS" if self.passed else "FAIL"}


def _le(suite, name, value, limit):
    value = float(value)
    return Check(suite, name, value, limit, bool(np.isfinite(value) and value <= limit))


# ------------------------------------------------------------------ bubble

def bubble_suite(n: int, seed: int = 0) -> list:
    rng = np.random.default_rng(seed)
    y = rng.standard_normal((1000, n)) * 3.0
    y[:, -1] = np.abs(y[:, -1])
    worst = 0.0
    for d in np.geomspace(1e-3, 10.0, 5):
        a = bub.bubble_family(d * y, d, n)
        b = d ** (-(n - 2) / 2) * bub.bubble(y, n)
        worst = max(worst, float(np.max(np.abs(a - b) / np.abs(b))))
    out = [_le("bubble", "scaling_identity_rel", worst, 1e-13)]
    dec = bub.decay_exponents(n)
    for tau, s in dec.items():
        out.append(_le("bubble", f"decay_tau{tau}_abs_dev", abs(s - (2 - tau - n)), 0.2))
    res = bub.residuals(y, n)
    sc = bub.residual_scales(y, n)
    for label, r, s in zip(("interior", "boundary", "linearized"), res, sc):
        out.append(_le("bubble", f"residual_{label}_rel", np.max(np.abs(r) / np.maximum(s, 1e-300)), 1e-12))
    return out


# --------------------------------------------------------------- curvature

def curvature_suite(curv: cv.CurvatureData, seed: int = 0) -> list:
    n, m = curv.n, curv.m
    rng = np.random.default_rng(seed)
    out = []
    rad = cv.spd_radius(curv)
    y = rng.standard_normal((512, n))
    y *= (0.999 * rad * rng.random(512) ** (1.0 / n) / np.linalg.norm(y, axis=1))[:, None]
    y[:, -1] = np.abs(y[:, -1])
    Ginv = cv.metric_inverse(curv, y)
    asym = float(np.max(np.abs(Ginv - np.swapaxes(Ginv, -1, -2))))
    lam_min = float(np.linalg.eigvalsh(0.5 * (Ginv + np.swapaxes(Ginv, -1, -2))).min())
    out.append(_le("curvature", "metric_inverse_asymmetry", asym, 1e-12))
    out.append(Check("curvature", "metric_inverse_min_eig", lam_min, 0.0, lam_min > 0))

    other = cv.random_admissible(seed + 1000, 1.0, n)
    a, b = 0.7, -1.3
    combo = curv.scaled(a) + other.scaled(b)
    lhs = cv.rhs_corrector(combo, y)
    rhs = a * cv.rhs_corrector(curv, y) + b * cv.rhs_corrector(other, y)
    out.append(_le("curvature", "rhs_linearity_rel",
                   np.max(np.abs(lhs - rhs)) / max(np.max(np.abs(rhs)), 1e-300), 1e-12))

    Q = special_ortho_group.rvs(m, random_state=seed)
    rot = curv.rotated(Q)
    for label, f in (("weyl_norm", cv.weyl_norm_sq), ("rnn_norm", cv.rnn_norm_sq)):
        v0, v1 = f(curv), f(rot)
        out.append(_le("curvature", f"{label}_rotation_rel", abs(v1 - v0) / max(abs(v0), 1e-300), 1e-12))

    full = cv.rhs_corrector(curv, y)
    nob = cv.rhs_corrector(curv.without_rbar(), y)
    out.append(_le("curvature", "rhs_rbar_independence",
                   np.max(np.abs(full - nob)) / max(np.max(np.abs(full)), 1e-300), 1e-12))
    return out


# --------------------------------------------------------------- corrector

def sector_fd_errors(n: int, steps=(0.04, 0.02, 0.01), seed: int = 0) -> list:
    """``max |FD Laplacian / reduced operator - 1|`` for ``T_ij z_i z_j w`` at each step."""
    m = n - 1
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, m))
    T = A + A.T
    T -= np.trace(T) / m * np.eye(m)

    def w(r, t):
        return ((1 + t) ** 2 + r ** 2) ** (-n / 2.0)

    def field(y):
        z, t = y[:, :m], y[:, -1]
        return np.einsum("pi,ij,pj->p", z, T, z) * w(np.linalg.norm(z, axis=1), t)

    y = rng.standard_normal((64, n)) * 0.8
    y[:, -1] = 0.3 + np.abs(y[:, -1])
    z = y[:, :m]
    q = np.einsum("pi,ij,pj->p", z, T, z)
    keep = np.abs(q) > 0.05 * np.max(np.abs(q))
    y, q = y[keep], q[keep]
    r = np.linalg.norm(y[:, :m], axis=1)
    reduced = q * cor.reduced_operator(w, n, r, y[:, -1])
    return [float(np.max(np.abs(cor.brute_force_laplacian(field, y, h) / reduced - 1.0))) for h in steps]


def corrector_suite(curv: cv.CurvatureData, sol: cor.CorrectorSolution, seed: int = 0) -> list:
    out = []
    errs = sector_fd_errors(curv.n, seed=seed)
    out.append(_le("corrector", "sector_fd_ratio_dev_finest", errs[-1], 0.02))
    out.append(Check("corrector", "sector_fd_refinement_factor", errs[0] / errs[-1], 1.0,
                     bool(errs[0] > errs[1] > errs[2])))
    _, orders = cor.manufactured_errors(curv.n)
    out.append(_le("corrector", "manufactured_order_abs_dev", abs(orders[-1] - 2.0), 0.3))
    out.append(_le("corrector", "kernel_projection_defect", sol.residuals["kernel_defect_max"], sol.tol))
    Q = special_ortho_group.rvs(curv.m, random_state=seed + 1)
    rot = curv.rotated(Q)
    base = cor.v_lap_v(sol)
    turned = cor.v_lap_v(cor.solve_corrector(rot, sol.grid, sol.tol, sol.far_field))
    out.append(_le("corrector", "v_lap_v_rotation_rel", abs(turned - base) / max(abs(base), 1e-300), 1e-8))
    return out


# ------------------------------------------------------------ reduced energy

def reduced_energy_suite(curv: cv.CurvatureData, sol: cor.CorrectorSolution, seed: int = 0,
                         interval=(0.1, 10.0)) -> list:
    n = curv.n
    out = []
    ph = re.phi(curv, sol).value
    C = re.const_C(n)
    base = re.maximize(ph, n, interval, C)
    worst = 0.0
    for k in (0.5, 3.0, 17.0):
        other = re.maximize(k * ph, n, interval, k * C)
        worst = max(worst, abs(other.golden - base.golden) / base.golden)
    out.append(_le("reduced_energy", "argmax_ratio_invariance", worst, 1e-9))
    worst = 0.0
    for s in (0.5, 2.0, 3.0):
        cs = curv.scaled(s)
        ps = re.phi(cs, cor.solve_corrector(cs, sol.grid, sol.tol, sol.far_field)).value
        worst = max(worst, abs(ps / ph - s * s) / (s * s))
    out.append(_le("reduced_energy", "phi_quadratic_homogeneity", worst, 1e-8))
    c8 = curv if n == 8 else cv.random_admissible(seed, 1.0, 8)
    s8 = sol if n == 8 else cor.solve_corrector(c8, tol=sol.tol)
    rt = re.phi(c8, s8).rnn_term
    out.append(Check("reduced_energy", "n8_i4_summand", rt, 0.0, rt == 0.0))
    printed = re.b_log_coefficient(n)
    sym = re.log_coefficient_symbolic(n)
    num = re.log_coefficient_numeric(n)
    out.append(_le("reduced_energy", "b_log_coefficient_symbolic_rel", abs(sym - printed) / abs(printed), 1e-10))
    out.append(_le("reduced_energy", "b_log_coefficient_numeric_rel", abs(num - printed) / abs(printed), 1e-10))
    return out


# -------------------------------------------------------------- asymptotics

def exponent_identity_worst_defect(draws: int = 20, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(draws):
        n = int(rng.integers(5, 25))
        eps = float(10 ** rng.uniform(-8, -1))
        worst = max(worst, *map(abs, asy.exponent_identity_defects(n, eps)))
    return worst


def boundary_l2_qmc(sol: cor.CorrectorSolution, points: int = 256, replicates: int = 8, seed: int = 0):
    """``||v(., 0)||_{L^2}^2`` with scrambled-Sobol angles on the grid's radial cells."""
    m = sol.n - 1
    g = sol.grid
    rc = g.r_centers
    V = g.cell_volumes(m - 1)
    est = []
    for rep in range(replicates):
        th = sobol_sphere(points, m, seed=np.random.default_rng([seed, rep]))
        y = np.zeros((len(rc), points, sol.n))
        y[..., :m] = rc[:, None, None] * th[None, :, :]
        v = sol.eval(y.reshape(-1, sol.n)).reshape(len(rc), points)
        est.append(sphere_area(m) * float(V @ np.mean(v * v, axis=1)))
    est = np.array(est)
    return float(est.mean()), float(est.std(ddof=1) / np.sqrt(replicates))


def asymptotics_suite(curv: cv.CurvatureData, sol: cor.CorrectorSolution, lam: float = 1.0,
                      tail_eps=(1e-5, 1e-9), settings: asy.RemainderSettings | None = None,
                      seed: int = 0) -> list:
    n = curv.n
    st = settings or asy.RemainderSettings(n_angular=128, n_radial=24, replicates=2)
    out = [_le("asymptotics", "exponent_identity_max_defect", exponent_identity_worst_defect(seed=seed), 1e-14)]

    eps = 1e-4
    delta = lam * eps ** 0.25
    prev = None
    ok, worst_drop = True, 0.0
    for s in (0.5, 1.0, 2.0):
        cs = curv.scaled(s)
        q = asy.remainder_quantities(cs, cor.solve_corrector(cs, sol.grid, sol.tol, sol.far_field),
                                     delta, eps, st).values
        ok &= all(v >= 0 for v in q.values())
        if prev is not None:
            for k in q:
                worst_drop = max(worst_drop, (prev[k] - q[k]) / max(prev[k], 1e-300))
        prev = q
    out.append(Check("asymptotics", "Q_nonnegative", float(ok), 1.0, ok))
    out.append(_le("asymptotics", "Q_scale_monotonicity_max_drop", max(worst_drop, 0.0), 0.0))

    grid = np.geomspace(tail_eps[0], tail_eps[1], 5)
    s1 = asy.scaling_study(curv, sol, lam, grid, st)
    s2 = asy.scaling_study(curv, sol, lam, grid, _with_radius(st, 2.0 * st.radius))
    change = max(abs(s1.slopes[k] - s2.slopes[k]) for k in s1.slopes)
    out.append(_le("asymptotics", "truncation_doubling_slope_change", change, 0.05))

    if n >= 7:
        mi = re.moment_integrals(n)
        mean, se = re.i4_qmc(n, log2_points=14, seed=seed)
        out.append(_le("asymptotics", "i4_qmc_vs_closed_in_se", abs(mean - mi.closed["I4"]) / se, 3.0))
    mean, se = boundary_l2_qmc(sol, seed=seed)
    _, vn = cor.boundary_moments(sol)
    dev = abs(mean - vn * vn) / se if se > 0 else (0.0 if mean == vn * vn else np.inf)
    out.append(_le("asymptotics", "boundary_l2_qmc_vs_design_in_se", dev, 3.0))
    return out


def _with_radius(st: asy.RemainderSettings, radius: float) -> asy.RemainderSettings:
    return replace(st, radius=radius)
