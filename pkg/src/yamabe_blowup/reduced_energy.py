"""Expansion constants, the curvature functional phi and the reduced energy in lambda.

Moment integrals (with ``U`` the standard bubble, ``m = n - 1``)::

    I1 = int_{R^m} U(z,0)^{2(n-1)/(n-2)} dz
    I2 = int_{R^m} U(z,0)^{2(n-1)/(n-2)} ln U(z,0) dz
    I3 = int_{R^n_+} |z|^2 U^2
    I4 = int_{R^n_+} t^2 |z|^4 ((1+t)^2 + |z|^2)^{-n}

Each has a Gamma/Beta closed form and an adaptive-quadrature value computed
independently after the substitution ``r = tan(theta)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.special import beta as beta_fn, digamma, gammaln
from scipy.stats import qmc, norm, chi2, beta as beta_dist

from .bubble import DomainError, as_points, bubble_family, check_dimension
from .corrector import CorrectorSolution, v_lap_v
from .curvature import CurvatureData, rnn_norm_sq, weyl_norm_sq
from .spherical import sphere_area

QUAD_RTOL = 1e-12


# --------------------------------------------------------- moment integrals

def _ball_moment(m: int, p: float, k: int = 0) -> float:
    """``int_{R^m} |z|^k (1 + |z|^2)^{-p} dz`` in closed form."""
    if not 2 * p > m + k:
        raise DomainError(f"moment diverges: m={m}, p={p}, k={k}")
    a = 0.5 * (m + k)
    return 0.5 * sphere_area(m) * float(np.exp(gammaln(a) + gammaln(p - a) - gammaln(p)))


def closed_forms(n: int) -> dict:
    n = check_dimension(n)
    m = n - 1
    I1 = float(np.exp(0.5 * m * np.log(np.pi) + gammaln(0.5 * m) - gammaln(m)))
    I2 = -0.5 * (n - 2) * I1 * float(digamma(n - 1) - digamma(0.5 * (n - 1)))
    out = {"I1": I1, "I2": I2}
    if n > 6:
        # int |z|^2 (a^2+|z|^2)^{-(n-2)} dz = a^{m+2-2(n-2)} * ball moment; int_0^inf (1+t)^{5-n} dt = 1/(n-6)
        out["I3"] = _ball_moment(m, n - 2, 2) / (n - 6)
        # |z|^4 part gives a^{3-n}; int_0^inf t^2 (1+t)^{3-n} dt = B(3, n-6)
        out["I4"] = _ball_moment(m, n, 4) * float(beta_fn(3, n - 6))
    out["grad_U_sq"] = (n - 2) * I1
    return out


def _tan_quad(f, rtol):
    """``int_0^inf f(r) dr`` via ``r = tan(theta)``."""
    g = lambda th: f(np.tan(th)) / np.cos(th) ** 2
    val, err = integrate.quad(g, 0.0, 0.5 * np.pi, epsabs=0.0, epsrel=rtol, limit=400)
    return val, err


def _tan_dblquad(f, rtol):
    """``int_0^inf int_0^inf f(r, t) dr dt`` via tangent substitutions in both variables."""
    def g(th_r, th_t):
        r, t = np.tan(th_r), np.tan(th_t)
        return f(r, t) / (np.cos(th_r) ** 2 * np.cos(th_t) ** 2)
    val, err = integrate.dblquad(g, 0.0, 0.5 * np.pi, 0.0, 0.5 * np.pi, epsabs=0.0, epsrel=rtol)
    return val, err


def quadrature_values(n: int, rtol: float = QUAD_RTOL) -> dict:
    n = check_dimension(n)
    m = n - 1
    S = sphere_area(m)
    p = 2.0 * (n - 1) / (n - 2)
    out = {}
    out["I1"] = S * _tan_quad(lambda r: r ** (m - 1) * (1 + r * r) ** (-0.5 * (n - 2) * p), rtol)[0]
    out["I2"] = S * _tan_quad(
        lambda r: -0.5 * (n - 2) * np.log1p(r * r) * r ** (m - 1) * (1 + r * r) ** (-0.5 * (n - 2) * p),
        rtol)[0]
    if n > 6:
        out["I3"] = S * _tan_dblquad(
            lambda r, t: r ** (m + 1) * ((1 + t) ** 2 + r * r) ** (-(n - 2)), rtol)[0]
        out["I4"] = S * _tan_dblquad(
            lambda r, t: t * t * r ** (m + 3) * ((1 + t) ** 2 + r * r) ** (-n), rtol)[0]
    # |grad U|^2 = (n-2)^2 D^{-n} |y + e_n|^2 = (n-2)^2 D^{1-n}
    out["grad_U_sq"] = S * _tan_dblquad(
        lambda r, t: (n - 2) ** 2 * r ** (m - 1) * ((1 + t) ** 2 + r * r) ** (1 - n), rtol)[0]
    return out


@dataclass(frozen=True)
class MomentIntegrals:
    n: int
    closed: dict
    quadrature: dict

    def __getitem__(self, key):
        return self.closed[key]

    def relative_gaps(self) -> dict:
        return {k: abs(self.closed[k] - self.quadrature[k]) / abs(self.closed[k]) for k in self.closed}

    def agree(self, tol: float = 1e-8) -> bool:
        return all(g < tol for g in self.relative_gaps().values())


@lru_cache(maxsize=None)
def moment_integrals(n: int, rtol: float = QUAD_RTOL) -> MomentIntegrals:
    """Closed forms and quadrature for I1..I4 and ``int |grad U|^2``.

    ``I3`` and ``I4`` converge only for ``n > 6`` and are omitted otherwise.
    """
    return MomentIntegrals(n, closed_forms(n), quadrature_values(n, rtol))


def i4_qmc(n: int, log2_points: int = 16, replicates: int = 8, seed: int = 0):
    """Quasi-Monte-Carlo estimate of I4 in the full ``n`` dimensions.

    Importance sampling: ``t`` from the Beta-prime(3, n-6) density
    ``t^2 (1+t)^{3-n} / B(3, n-6)`` and, given ``t``, ``z`` from a multivariate
    Student-t with ``n-3`` degrees of freedom and scale ``(1+t)/sqrt(n-3)``.
    A point uses ``n + 1`` uniform coordinates: ``m`` normals, one chi-square
    and one Beta variate.  Returns ``(mean, standard error over replicates)``.
    """
    n = check_dimension(n, 7)
    m = n - 1
    nu = n - 3
    logB = np.log(beta_fn(3, n - 6))
    log_tnorm = gammaln(0.5 * (nu + m)) - gammaln(0.5 * nu) - 0.5 * m * np.log(nu * np.pi)
    est = []
    for rep in range(replicates):
        u = qmc.Sobol(d=m + 2, scramble=True, seed=np.random.default_rng([seed, rep])).random_base2(log2_points)
        u = np.clip(u, 1e-300, 1 - 1e-16)
        x = beta_dist.ppf(u[:, -1], 3, n - 6)
        t = x / (1 - x)
        a = 1.0 + t
        g = norm.ppf(u[:, :m])
        c = chi2.ppf(u[:, m], nu)
        z = g / np.sqrt(c / nu)[:, None] * (a / np.sqrt(nu))[:, None]
        r2 = np.sum(z * z, axis=1)
        # proposal density of z given t: t-density with scale sigma = a/sqrt(nu)
        log_qz = log_tnorm - m * np.log(a / np.sqrt(nu)) - 0.5 * (nu + m) * np.log1p(r2 / (a * a))
        log_qt = 2 * np.log(t) + (3 - n) * np.log1p(t) - logB
        log_f = 2 * np.log(t) + 2 * np.log(r2) - n * np.log(a * a + r2)
        est.append(np.mean(np.exp(log_f - log_qz - log_qt)))
    est = np.array(est)
    return float(est.mean()), float(est.std(ddof=1) / np.sqrt(replicates))


# ------------------------------------------------------------------ constants

def const_A(n: int) -> float:
    mi = moment_integrals(n)
    return 0.5 * mi["grad_U_sq"] - (n - 2) ** 2 / (2.0 * (n - 1)) * mi["I1"]


def const_A_quadrature(n: int) -> float:
    q = moment_integrals(n).quadrature
    return 0.5 * q["grad_U_sq"] - (n - 2) ** 2 / (2.0 * (n - 1)) * q["I1"]


def const_C(n: int) -> float:
    return (n - 2) ** 3 / (4.0 * (n - 1)) * moment_integrals(n)["I1"]


def b_log_coefficient(n: int) -> float:
    """Coefficient of ``eps |ln eps|`` in ``B(eps)`` as displayed."""
    return -(n - 2) ** 3 / (16.0 * (n - 1)) * moment_integrals(n)["I1"]


def b_linear_coefficient(n: int) -> float:
    mi = moment_integrals(n)
    return (n - 2) ** 3 / (2.0 * (n - 1)) * mi["I1"] - (n - 2) ** 2 / (2.0 * (n - 1)) * mi["I2"]


def const_B(n: int, eps) -> np.ndarray | float:
    eps = np.asarray(eps, dtype=float)
    if np.any(eps < 0):
        raise DomainError("eps must be nonnegative")
    safe = np.where(eps > 0, eps, 1.0)
    out = eps * b_linear_coefficient(n) + b_log_coefficient(n) * np.where(eps > 0, eps * np.abs(np.log(safe)), 0.0)
    return float(out) if out.ndim == 0 else out


def log_coefficient_symbolic(n: int) -> float:
    """``eps |ln eps|`` coefficient re-derived by series expansion.

    With ``delta = lambda eps^{1/4}`` the boundary term carries
    ``delta^{-eps (n-2)/2} U^eps - 1``; its ``eps ln eps`` coefficient times the
    prefactor ``-(n-2)^2 / (2(n-1))`` and ``I1`` is the result.
    """
    import sympy as sp

    e, L, lam, u = sp.symbols("epsilon L lambda u", positive=True)
    nn = sp.Integer(n)
    delta_pow = sp.exp(-e * (nn - 2) / 2 * (sp.log(lam) + L / 4))
    expr = delta_pow * sp.exp(e * sp.log(u)) - 1
    first = sp.diff(expr, e).subs(e, 0)
    coeff_eps_log = sp.diff(first, L)  # d/dL of the O(eps) term, L = ln eps
    inner = -coeff_eps_log  # coefficient of eps|ln eps| since ln eps = -|ln eps|
    total = -(nn - 2) ** 2 / (2 * (nn - 1)) * inner
    return float(sp.nsimplify(total)) * moment_integrals(n)["I1"]


def log_coefficient_numeric(n: int, lam: float = 1.3, digits: int = 80) -> float:
    """Same coefficient extracted from the exact eps-dependence at tiny eps.

    ``F(eps) = int [delta^{-eps(n-2)/2} U^eps - 1] U^{2(n-1)/(n-2)} dz`` has an
    exact Gamma-function form; two evaluations at ``eps ~ 1e-40`` separate the
    ``eps ln eps`` and ``eps`` terms.
    """
    import mpmath as mp

    with mp.workdps(digits):
        m = n - 1
        p0 = mp.mpf(n - 1)

        def ball(p):
            return mp.pi ** (mp.mpf(m) / 2) * mp.gamma(p - mp.mpf(m) / 2) / mp.gamma(p)

        def F(e):
            delta = lam * e ** mp.mpf("0.25")
            p = p0 + e * (n - 2) / mp.mpf(2)
            return delta ** (-e * (n - 2) / mp.mpf(2)) * ball(p) - ball(p0)

        e1, e2 = mp.mpf("1e-40"), mp.mpf("1e-44")
        # F = a e ln e + b e + O(e^2 ln^2 e)
        a = (F(e1) / e1 - F(e2) / e2) / (mp.log(e1) - mp.log(e2))
        coeff = -(n - 2) ** 2 / mp.mpf(2 * (n - 1)) * (-a)
        return float(coeff)


# -------------------------------------------------------------------- phi

@dataclass(frozen=True)
class PhiValue:
    value: float
    half_v_lap_v: float
    weyl_term: float
    rnn_term: float

    def __float__(self):
        return self.value


def phi(curv: CurvatureData, sol: CorrectorSolution) -> PhiValue:
    """``1/2 int v Lap v - (n-2)/(96(n-1)) |W|^2 I3 - (n-2)(n-8)/(2(n^2-1)) |Rnn|^2 I4``."""
    if sol.curvature_hash != curv.content_hash():
        raise ValueError("corrector solution was computed for different curvature data")
    n = curv.n
    mi = moment_integrals(n)
    half = 0.5 * v_lap_v(sol)
    wt = -(n - 2) / (96.0 * (n - 1)) * weyl_norm_sq(curv) * mi["I3"]
    rt = -(n - 2) * (n - 8) / (2.0 * (n * n - 1)) * rnn_norm_sq(curv) * mi["I4"]
    return PhiValue(half + wt + rt, half, wt, rt)


# ---------------------------------------------------------- reduced energy

def reduced_energy(lam, eps: float, phi_val: float, n: int):
    """``A + B(eps) + eps lam^4 phi + C eps ln lam`` (the o(eps) term dropped)."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0):
        raise DomainError("lambda must be positive")
    if not eps > 0:
        raise DomainError("eps must be positive")
    out = const_A(n) + const_B(n, eps) + eps * (lam ** 4 * phi_val + const_C(n) * np.log(lam))
    return float(out) if out.ndim == 0 else out


def reduced_energy_derivative(lam, eps: float, phi_val: float, n: int):
    lam = np.asarray(lam, dtype=float)
    out = eps * (4.0 * lam ** 3 * phi_val + const_C(n) / lam)
    return float(out) if out.ndim == 0 else out


def lambda_star(phi_val: float, C: float) -> float:
    if not phi_val < 0:
        raise DomainError(f"phi={phi_val} is not negative: no interior maximum")
    return float((C / (4.0 * abs(phi_val))) ** 0.25)


def _difference(x1, x2, phi_val, C):
    """``f(x1) - f(x2)`` for ``f = phi x^4 + C ln x`` without cancellation."""
    return phi_val * (x1 - x2) * (x1 + x2) * (x1 * x1 + x2 * x2) + C * np.log1p((x1 - x2) / x2)


def golden_section(phi_val: float, C: float, a: float, b: float, rtol: float = 1e-13) -> float:
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    lo, hi = a, b
    x1 = hi - invphi * (hi - lo)
    x2 = lo + invphi * (hi - lo)
    while hi - lo > rtol * hi:
        if _difference(x1, x2, phi_val, C) > 0:
            hi, x2 = x2, x1
            x1 = hi - invphi * (hi - lo)
        else:
            lo, x1 = x1, x2
            x2 = lo + invphi * (hi - lo)
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class Maximizer:
    lam: float
    interior: bool
    closed_form: float
    golden: float


def maximize(phi_val: float, n: int, interval=(0.1, 10.0), C: float | None = None) -> Maximizer:
    """Maximize ``lam -> lam^4 phi + C ln lam`` over ``[a, b]`` (``eps`` factors out)."""
    a, b = map(float, interval)
    if not 0 < a < b:
        raise DomainError("need 0 < a < b")
    C = const_C(n) if C is None else C
    ls = lambda_star(phi_val, C)
    g = golden_section(phi_val, C, a, b)
    if a <= ls <= b:
        return Maximizer(ls, True, ls, g)
    best = a if _difference(a, b, phi_val, C) >= 0 else b
    return Maximizer(best, False, ls, g)


def landscape(phi_val: float, n: int, eps: float, interval=(0.1, 10.0), points: int = 201):
    """Samples ``(lam, I_eps, dI/dlam)`` on a geometric grid."""
    lam = np.geomspace(interval[0], interval[1], points)
    return lam, reduced_energy(lam, eps, phi_val, n), reduced_energy_derivative(lam, eps, phi_val, n)


# ------------------------------------------------------------- the profile

@dataclass(frozen=True)
class BlowUpProfile:
    """``y -> U_delta(y) + delta^2 (v)_delta(y)``."""

    delta: float
    sol: CorrectorSolution

    def __call__(self, y):
        n = self.sol.n
        y = as_points(y, n)
        return bubble_family(y, self.delta, n) + self.delta ** 2 * self.sol.eval_family(y, self.delta)

    def sample_min(self, radius: float = 1.0, points: int = 4096, seed: int = 0) -> float:
        return float(self(sample_half_ball(self.sol.n, radius, points, seed)).min())

    def sample_max(self, radius: float = 1.0, points: int = 4096, seed: int = 0) -> float:
        y = sample_half_ball(self.sol.n, radius, points, seed)
        return float(max(self(y).max(), self(np.zeros((1, self.sol.n)))[0]))


def sample_half_ball(n: int, radius: float, points: int, seed: int = 0) -> np.ndarray:
    """Scrambled Sobol points in the half-ball ``|y| <= radius, t >= 0``."""
    u = qmc.Sobol(d=n + 1, scramble=True, seed=seed).random(points)
    g = norm.ppf(np.clip(u[:, :n], 1e-15, 1 - 1e-15))
    g[:, -1] = np.abs(g[:, -1])
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * (radius * u[:, n] ** (1.0 / n))[:, None]


def assemble_profile(delta: float, curv: CurvatureData, sol: CorrectorSolution) -> BlowUpProfile:
    if not delta > 0:
        raise DomainError(f"delta={delta} must be positive")
    if sol.curvature_hash != curv.content_hash():
        raise ValueError("corrector solution was computed for different curvature data")
    return BlowUpProfile(float(delta), sol)


# ------------------------------------------------------------------ report

@dataclass
class ReducedEnergyReport:
    n: int
    A: float
    C: float
    eps: float
    B: float
    B_log_coefficient: float
    moments: MomentIntegrals
    phi: PhiValue
    maximizer: Maximizer
    landscape: tuple = field(repr=False, default=())

    @property
    def lambda_star(self) -> float:
        return self.maximizer.closed_form


def report(curv: CurvatureData, sol: CorrectorSolution, eps: float = 1e-4,
           interval=(0.1, 10.0), points: int = 201) -> ReducedEnergyReport:
    n = curv.n
    ph = phi(curv, sol)
    mx = maximize(ph.value, n, interval)
    return ReducedEnergyReport(n, const_A(n), const_C(n), eps, const_B(n, eps), b_log_coefficient(n),
                               moment_integrals(n), ph, mx, landscape(ph.value, n, eps, interval, points))
