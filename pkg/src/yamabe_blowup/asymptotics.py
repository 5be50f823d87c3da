"""Exponent bookkeeping and numerical scaling of the remainder norms.

All remainder quantities are computed in the blown-up variable ``x = y / delta``
and converted back with the exact Jacobian/amplitude factor, so norms with
eps-dependent exponents carry their ``delta^{-O(eps)}`` factors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma, roots_legendre

from .bubble import DomainError, bubble, bubble_gradient, bubble_hessian, check_dimension
from .corrector import CorrectorSolution
from .curvature import (CurvatureData, mean_curvature_model, metric_divergence, metric_orders,
                        scalar_curvature_model)
from .fitting import log_correction_test, loglog_fit
from .spherical import sobol_sphere


# ------------------------------------------------------------ exponents

def s_eps(n: int, eps):
    if np.any(np.asarray(eps) < 0):
        raise DomainError("eps must be nonnegative")
    return 2.0 * (n - 1) / (n - 2) + n * np.asarray(eps, dtype=float)


def nittka_exponents(n: int, eps):
    """Integrability exponent (renamed from the boundary-point letter) and the gap ``r``."""
    n = check_dimension(n)
    eps = np.asarray(eps, dtype=float)
    if np.any(eps < 0):
        raise DomainError("eps must be nonnegative")
    k = (n - 2) / (n - 1)
    q = (2 * n + n * n * k * eps) / (n + 2 + 2 * n * k * eps)
    top = 2 * (n - 1) + n * (n - 2) * eps
    r = top / (n + (n - 2) * eps) - top / (n + (n - 2) * (n / (n - 1)) * eps)
    if np.any(q < 2 * n / (n + 2) - 1e-15) or np.any(q >= n / 2):
        raise DomainError("exponent outside [2n/(n+2), n/2)")
    return (float(q), float(r)) if q.ndim == 0 else (q, r)


def boundary_source_exponent(n: int, eps) -> float:
    """``(2(n-1) + n(n-2) eps) / (n + (n-2) eps)``, the exponent of ``f_eps(v)``."""
    return (2 * (n - 1) + n * (n - 2) * eps) / (n + (n - 2) * eps)


def exponent_identity_defects(n: int, eps) -> tuple:
    q, r = nittka_exponents(n, eps)
    d1 = (n - 1) * q / (n - 2 * q) - s_eps(n, eps)
    d2 = (n - 1) * q / (n - q) + r - boundary_source_exponent(n, eps)
    return float(d1), float(d2)


# --------------------------------------------------- remainder integrands

def _pow_remainder(s, p):
    """``(1+s)^p - 1 - p s`` accurate for small ``s``."""
    small = np.abs(s) < 1e-3
    series = 0.5 * p * (p - 1) * s * s * (1 + (p - 2) / 3 * s * (1 + (p - 3) / 4 * s))
    safe = np.where(small, 0.0, s)
    direct = np.power(np.maximum(1 + safe, 0.0), p) - 1 - p * safe
    return np.where(small, series, direct)


@dataclass(frozen=True)
class RadialRule:
    """Gauss-Legendre nodes in ``log(rho)`` on ``[rho_min, rho_max]``."""

    nodes: np.ndarray
    weights: np.ndarray

    @classmethod
    def build(cls, rho_min, rho_max, count):
        s, w = roots_legendre(count)
        a, b = np.log(rho_min), np.log(rho_max)
        ls = 0.5 * (b - a) * s + 0.5 * (b + a)
        rho = np.exp(ls)
        return cls(rho, 0.5 * (b - a) * w * rho)


@dataclass
class RemainderQuantities:
    delta: float
    eps: float
    values: dict
    stderr: dict
    exponents: dict

    def composite(self) -> float:
        return max(self.values.values())


@dataclass(frozen=True)
class RemainderSettings:
    radius: float = 1.0
    h_exponent: float = 2.0
    normal_coeff: float = 0.0
    n_radial: int = 48
    n_angular: int = 1024
    replicates: int = 4
    rho_min: float = 1e-4
    seed: int = 0


def _norm(values_p, rule_w, dim_pow, rho, p):
    """``(int |F|^p)^{1/p}`` with angular means already taken in ``values_p``."""
    return float(np.sum(rule_w * rho ** dim_pow * values_p)) ** (1.0 / p)


def _boundary_fields(curv, sol, delta, eps, x, settings):
    n = curv.n
    Ub = bubble(x, n)
    v = sol.eval(x)
    Uh = Ub + delta ** 2 * v
    pos = np.maximum(Uh, 0.0)
    y = delta * x
    h = curv.h_coeff * mean_curvature_model(y, 1.0, settings.h_exponent)
    F_h = h * Uh
    p = n / (n - 2)
    F_b = (n - 2) * Ub ** p * _pow_remainder(delta ** 2 * v / Ub, p)
    lnU = np.log(np.where(pos > 0, pos, 1.0)) - 0.5 * (n - 2) * np.log(delta)
    F_p = (n - 2) * pos ** p * np.expm1(eps * lnU)
    F_p = np.where(pos > 0, F_p, 0.0)
    return F_h, F_b, F_p


def _interior_field(curv, sol, delta, x, settings):
    n, m = curv.n, curv.m
    H = bubble_hessian(x, n)[..., :m, :m]
    gU = bubble_gradient(x, n)[..., :m]
    U = bubble(x, n)
    v, gv, Hv = sol.derivatives(x)
    y = delta * x
    g = metric_orders(curv, y)
    div = metric_divergence(curv, y)
    d = div[2] + div[3] + div[4]
    G = np.einsum("...ij,...ij->...", g[3] + g[4], H)
    G += delta ** 2 * np.einsum("...ij,...ij->...", g[2] + g[3] + g[4], Hv[..., :m, :m])
    G += delta * np.einsum("...j,...j->...", d, gU + delta ** 2 * gv[..., :m])
    a_tilde = (n - 2) / (4.0 * (n - 1)) * scalar_curvature_model(curv, y, settings.normal_coeff)
    G -= delta ** 2 * a_tilde * (U + delta ** 2 * v)
    return G


def remainder_quantities(curv: CurvatureData, sol: CorrectorSolution, delta: float, eps: float,
                         settings: RemainderSettings | None = None) -> RemainderQuantities:
    """Norms of the four remainder pieces of the ansatz ``W_delta + delta^2 V_delta``.

    ``Q_h``    mean-curvature term on the boundary;
    ``Q_Delta`` interior defect ``Delta_g(.) - a(.)`` (quadratic metric part cancels against the corrector);
    ``Q_bdry`` boundary nonlinearity mismatch;
    ``Q_pert`` ``f_eps - f_0`` with ``Lambda = 1``.
    Norm exponents are the eps-dependent integrability exponents with the gap ``r = eps``.
    """
    if not (delta > 0 and eps >= 0):
        raise DomainError("need delta > 0 and eps >= 0")
    if sol.curvature_hash != curv.content_hash():
        raise ValueError("corrector solution was computed for different curvature data")
    st = settings or RemainderSettings()
    n, m = curv.n, curv.m
    rho_max = st.radius / delta
    if rho_max > min(sol.reach):
        raise DomainError(f"radius/delta = {rho_max:.3g} exceeds the corrector domain")
    q, _ = nittka_exponents(n, eps)
    p_int = q + eps
    p_bd = (n - 1) * q / (n - q) + eps
    p_pert = boundary_source_exponent(n, eps)
    rule = RadialRule.build(st.rho_min, rho_max, st.n_radial)
    rho = rule.nodes
    samples = {k: [] for k in ("Q_h", "Q_Delta", "Q_bdry", "Q_pert")}
    for rep in range(st.replicates):
        th = sobol_sphere(st.n_angular, m, seed=np.random.default_rng([st.seed, 1, rep]))
        om = sobol_sphere(st.n_angular, n, seed=np.random.default_rng([st.seed, 2, rep]))
        om[:, -1] = np.abs(om[:, -1])
        xb = np.zeros((len(rho), len(th), n))
        xb[..., :m] = rho[:, None, None] * th[None, :, :]
        F_h, F_b, F_p = _boundary_fields(curv, sol, delta, eps, xb.reshape(-1, n), st)
        area_b = 2.0 * np.pi ** (m / 2) / gamma(m / 2)
        area_i = np.pi ** (n / 2) / gamma(n / 2)  # half of |S^{n-1}|
        mean = lambda F, p: area_b * np.mean(np.abs(F.reshape(len(rho), -1)) ** p, axis=1)
        samples["Q_h"].append(_norm(mean(F_h, p_bd), rule.weights, m - 1, rho, p_bd))
        samples["Q_bdry"].append(_norm(mean(F_b, p_bd), rule.weights, m - 1, rho, p_bd))
        samples["Q_pert"].append(_norm(mean(F_p, p_pert), rule.weights, m - 1, rho, p_pert))
        xi = (rho[:, None, None] * om[None, :, :]).reshape(-1, n)
        G = _interior_field(curv, sol, delta, xi, st)
        gi = area_i * np.mean(np.abs(G.reshape(len(rho), -1)) ** p_int, axis=1)
        samples["Q_Delta"].append(_norm(gi, rule.weights, n - 1, rho, p_int))
    # back to y: F_y(y) = delta^{-a} F_x(y/delta) -> factor delta^{-a + d/p}
    factors = {
        "Q_h": delta ** (-(n - 2) / 2 + (n - 1) / p_bd),
        "Q_Delta": delta ** (-(n + 2) / 2 + n / p_int),
        "Q_bdry": delta ** (-n / 2 + (n - 1) / p_bd),
        "Q_pert": delta ** (-n / 2 + (n - 1) / p_pert),
    }
    values, errs = {}, {}
    for k, s in samples.items():
        s = np.array(s) * factors[k]
        values[k] = float(s.mean())
        errs[k] = float(s.std(ddof=1) / np.sqrt(len(s))) if len(s) > 1 else float("nan")
    return RemainderQuantities(delta, eps, values, errs,
                               {"interior": p_int, "boundary": p_bd, "perturbation": p_pert})


# ---------------------------------------------------------------- studies

QUANTITIES = ("Q_h", "Q_Delta", "Q_bdry", "Q_pert")


@dataclass
class ScalingStudy:
    n: int
    lam: float
    eps: np.ndarray
    delta: np.ndarray
    values: dict
    stderr: dict
    composite: np.ndarray
    slopes: dict = field(default_factory=dict)
    slope_ci: dict = field(default_factory=dict)
    delta_slopes: dict = field(default_factory=dict)
    log_test: object = None

    @property
    def composite_slope(self) -> float:
        return self.slopes["composite"]

    @property
    def log_corrected(self) -> bool:
        return self.log_test is not None and self.log_test.significant()

    def rows(self):
        for k in range(len(self.eps)):
            yield (self.eps[k], self.delta[k], *(self.values[q][k] for q in QUANTITIES), self.composite[k])


def scaling_study(curv: CurvatureData, sol: CorrectorSolution, lam: float = 1.0, eps_grid=None,
                  settings: RemainderSettings | None = None) -> ScalingStudy:
    """Evaluate the remainder norms along ``delta = lam eps^{1/4}`` and fit exponents in eps."""
    eps = np.asarray(eps_grid if eps_grid is not None else np.geomspace(1e-2, 1e-6, 9), dtype=float)
    if np.any(np.diff(eps) >= 0):
        raise ValueError("eps grid must be strictly decreasing")
    if np.log10(eps[0] / eps[-1]) < 3 - 1e-9:
        raise ValueError("eps grid must span at least three decades")
    delta = lam * eps ** 0.25
    vals = {k: np.zeros(len(eps)) for k in QUANTITIES}
    errs = {k: np.zeros(len(eps)) for k in QUANTITIES}
    for i, (e, d) in enumerate(zip(eps, delta)):
        rq = remainder_quantities(curv, sol, d, e, settings)
        for k in QUANTITIES:
            vals[k][i] = rq.values[k]
            errs[k][i] = rq.stderr[k]
    comp = np.max(np.vstack([vals[k] for k in QUANTITIES]), axis=0)
    study = ScalingStudy(curv.n, lam, eps, delta, vals, errs, comp)
    for k in QUANTITIES + ("composite",):
        y = comp if k == "composite" else vals[k]
        if np.all(y > 0):
            fit = loglog_fit(eps, y)
            study.slopes[k] = fit.slope
            study.slope_ci[k] = fit.ci()
            study.delta_slopes[k] = loglog_fit(delta, y).slope
    if np.all(comp > 0) and len(eps) >= 4:
        study.log_test = log_correction_test(eps, comp)
    return study


# ------------------------------------------------------------------- gap

@dataclass(frozen=True)
class GapCheck:
    eps: float
    phi_norm: float
    bound: float
    ratio: float


def gap_bound(eps: float, phi_norm: float, C: float = 1.0) -> float:
    """``|phi|^2 + C (eps |log eps| + eps^{1/2}) |phi|``."""
    if phi_norm < 0:
        raise ValueError("phi_norm must be nonnegative")
    return phi_norm ** 2 + C * (eps * abs(np.log(eps)) + np.sqrt(eps)) * phi_norm


def predicted_phi_norm(eps: float, n: int, C: float = 1.0) -> float:
    """Size of the fixed-point correction: ``C eps^{3/4}``, times ``1 + |log eps|`` at n = 8."""
    base = C * eps ** 0.75
    return base * (1.0 + abs(np.log(eps))) if n == 8 else base


def verify_gap(eps_values, n: int, phi_norm=None, C: float = 1.0):
    """Bound over eps for each value; passes when ``bound / eps`` strictly decreases toward 0."""
    eps_values = np.asarray(eps_values, dtype=float)
    checks = []
    for e in eps_values:
        pn = predicted_phi_norm(e, n) if phi_norm is None else phi_norm(e)
        b = gap_bound(e, pn, C)
        checks.append(GapCheck(float(e), float(pn), float(b), float(b / e)))
    ratios = np.array([c.ratio for c in checks])
    order = np.argsort(-eps_values)
    monotone = bool(np.all(np.diff(ratios[order]) < 0))
    return monotone, checks
