"""Curvature corrector on the half-space via reduction to 2D (r, t) problems.

For a traceless symmetric ``T`` the ansatz ``v = T_ij z_i z_j w(r, t)`` with
``r = |z|`` turns ``-Laplacian v = T_ij z_i z_j h(r, t)`` into

    -[w_rr + (M/r) w_r + w_tt] = h,      M = n - 2 + 2*degree = n + 2,

with ``dw/dt = -n/(1+r^2) w`` on ``t = 0`` (since ``U^{2/(n-2)} = 1/(1+r^2)``
there) and a far-field condition on the truncation boundary.

Discretization: cell-centred finite volumes in ``r`` with exact volumes of the
weight ``r^M`` (so ``r = 0`` needs no special row), nodal three-point
differences in ``t`` and a one-sided second-order Robin row at ``t = 0``.
Both directions use a sinh-stretched map, which keeps the scheme second order.
"""

from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import RectBivariateSpline
from scipy.sparse.linalg import spsolve

from . import __version__
from .bubble import DomainError, as_points, kernel
from .curvature import PROFILES, CurvatureData, SectorDecomposition, sector_decompose
from .spherical import design5

CACHE_FORMAT = 1
MAX_STRETCH = 1.1


class SolverError(RuntimeError):
    """The discrete solve did not reach the requested tolerance."""


def _sinh_map(N, L, beta, x):
    if beta == 0:
        return L * x
    return L * np.sinh(beta * x) / np.sinh(beta)


@dataclass(frozen=True)
class RadialGrid:
    """Stretched tensor grid on ``(0, r_max] x [0, t_max]``."""

    n_r: int = 400
    n_t: int = 400
    r_max: float = 1000.0
    t_max: float = 1000.0
    beta_r: float = 8.0
    beta_t: float = 8.0

    def __post_init__(self):
        if self.n_r < 4 or self.n_t < 4:
            raise ValueError("grid needs at least 4 cells per direction")
        if self.r_max < 20 or self.t_max < 20:
            raise ValueError("truncation radii must be at least 20")
        if self.beta_r < 0 or self.beta_t < 0:
            raise ValueError("stretching parameters must be nonnegative")
        if self.stretch > MAX_STRETCH:
            raise ValueError(f"stretching factor {self.stretch:.4f} exceeds {MAX_STRETCH}")

    @property
    def stretch(self) -> float:
        """Largest ratio of consecutive spacings in either direction."""
        out = 1.0
        for h in (np.diff(self.r_faces), np.diff(self.t_nodes)):
            q = h[1:] / h[:-1]
            out = max(out, float(q.max()), float((1 / q).max()))
        return out

    @property
    def r_faces(self) -> np.ndarray:
        return _sinh_map(self.n_r, self.r_max, self.beta_r, np.arange(self.n_r + 1) / self.n_r)

    @property
    def r_centers(self) -> np.ndarray:
        return _sinh_map(self.n_r, self.r_max, self.beta_r, (np.arange(self.n_r) + 0.5) / self.n_r)

    @property
    def t_nodes(self) -> np.ndarray:
        return _sinh_map(self.n_t, self.t_max, self.beta_t, np.arange(self.n_t + 1) / self.n_t)

    def refined(self, factor: int) -> "RadialGrid":
        return RadialGrid(self.n_r * factor, self.n_t * factor, self.r_max, self.t_max,
                          self.beta_r, self.beta_t)

    def coarsened(self, factor: int) -> "RadialGrid":
        return RadialGrid(self.n_r // factor, self.n_t // factor, self.r_max, self.t_max,
                          self.beta_r, self.beta_t)

    def key(self) -> tuple:
        return (self.n_r, self.n_t, float(self.r_max), float(self.t_max),
                float(self.beta_r), float(self.beta_t))

    def cell_volumes(self, power: float) -> np.ndarray:
        """``int r^power dr`` over each radial cell."""
        f = self.r_faces
        return (f[1:] ** (power + 1) - f[:-1] ** (power + 1)) / (power + 1)

    def t_weights(self) -> np.ndarray:
        """Trapezoid weights on the t nodes."""
        h = np.diff(self.t_nodes)
        w = np.zeros(self.n_t + 1)
        w[:-1] += h / 2
        w[1:] += h / 2
        return w


# ------------------------------------------------------------ profile solves

@dataclass(frozen=True, eq=False)
class ProfileSolution:
    """Discrete profile ``w`` on cell centres x t nodes (the last t node is the far boundary)."""

    n: int
    name: str
    grid: RadialGrid
    w: np.ndarray
    source: np.ndarray
    degree: int = 2
    far_field: str = "dirichlet"
    algebraic_residual: float = 0.0
    _spline: object = field(default=None, repr=False, compare=False)

    @property
    def weight_power(self) -> int:
        return self.n - 2 + 2 * self.degree

    def spline(self) -> RectBivariateSpline:
        if self._spline is None:
            g = self.grid
            rc = g.r_centers
            if self.far_field == "dirichlet":
                r_ext = np.concatenate([[-g.r_max], -rc[::-1], rc, [g.r_max]])
                edge = np.zeros((1, self.w.shape[1]))
                vals = np.vstack([edge, self.w[::-1], self.w, edge])
            else:
                r_ext = np.concatenate([-rc[::-1], rc])
                vals = np.vstack([self.w[::-1], self.w])
            spl = RectBivariateSpline(r_ext, g.t_nodes, vals, kx=3, ky=3, s=0)
            object.__setattr__(self, "_spline", spl)
        return self._spline

    def __call__(self, r, t, dr: int = 0, dt: int = 0) -> np.ndarray:
        return self.spline().ev(r, t, dx=dr, dy=dt)

    def energy(self) -> float:
        """``int int r^M w h dr dt`` on the grid."""
        V = self.grid.cell_volumes(self.weight_power)
        return float(V @ (self.w * self.source) @ self.grid.t_weights())


def reduced_source(name_or_fn, n: int, r, t):
    if callable(name_or_fn):
        return name_or_fn(n, r, t)
    return PROFILES[name_or_fn](n, r, t)


def assemble_reduced(n: int, grid: RadialGrid, degree: int = 2, far_field: str = "dirichlet"):
    """Sparse matrix of the reduced operator with the Robin row at ``t = 0``.

    Unknowns are ordered ``k = i * n_tu + j`` (``i`` radial cell, ``j`` t node).
    """
    if far_field not in ("dirichlet", "matching"):
        raise ValueError(f"unknown far-field condition {far_field!r}")
    M = n - 2 + 2 * degree
    rc, rf, tn = grid.r_centers, grid.r_faces, grid.t_nodes
    Nr = grid.n_r
    Ntu = grid.n_t if far_field == "dirichlet" else grid.n_t + 1
    V = grid.cell_volumes(M)
    # face transmissibilities
    a_in = np.zeros(Nr)   # coupling to i+1
    a_in[:-1] = rf[1:-1] ** M / (rc[1:] - rc[:-1]) / V[:-1]
    a_out = np.zeros(Nr)  # coupling to i-1
    a_out[1:] = rf[1:-1] ** M / (rc[1:] - rc[:-1]) / V[1:]
    last = rf[-1] ** M / (rf[-1] - rc[-1]) / V[-1]

    rows, cols, vals = [], [], []

    def put(r, c, v):
        rows.append(r)
        cols.append(c)
        vals.append(v)

    idx = np.arange(Nr * Ntu).reshape(Nr, Ntu)
    h = np.diff(tn)
    # interior t rows
    for j in range(1, Ntu):
        k = idx[:, j]
        if j < grid.n_t:
            hm, hp = h[j - 1], h[j]
            cm = 2.0 / (hm * (hm + hp))
            cp = 2.0 / (hp * (hm + hp))
            put(k, idx[:, j - 1], np.full(Nr, -cm))
            if j + 1 < Ntu:
                put(k, idx[:, j + 1], np.full(Nr, -cp))
            diag = np.full(Nr, cm + cp)
            diag = diag + a_in + a_out
            put(k[:-1], idx[1:, j], -a_in[:-1])
            put(k[1:], idx[:-1, j], -a_out[1:])
            if far_field == "dirichlet":
                diag[-1] += last
            else:
                # w ~ rho^{2-n}: w_face = w / (1 + c (R - r)), flux -c w_face
                c = (n - 2) * rf[-1] / (rf[-1] ** 2 + tn[j] ** 2)
                diag[-1] += rf[-1] ** M * c / (1.0 + c * (rf[-1] - rc[-1])) / V[-1]
            put(k, k, diag)
        else:
            # matching row at t = t_max: w_t = -(n-2) t / rho^2 w, one-sided
            h1, h2 = h[-1], h[-2]
            put(k, idx[:, j], np.full(Nr, (2 * h1 + h2) / (h1 * (h1 + h2)))
                + (n - 2) * tn[j] / (rc ** 2 + tn[j] ** 2))
            put(k, idx[:, j - 1], np.full(Nr, -(h1 + h2) / (h1 * h2)))
            put(k, idx[:, j - 2], np.full(Nr, h1 / (h2 * (h1 + h2))))
    # Robin row at t = 0: one-sided second order
    h1, h2 = h[0], h[1]
    k = idx[:, 0]
    put(k, k, -(2 * h1 + h2) / (h1 * (h1 + h2)) + n / (1.0 + rc ** 2))
    put(k, idx[:, 1], np.full(Nr, (h1 + h2) / (h1 * h2)))
    put(k, idx[:, 2], np.full(Nr, -h1 / (h2 * (h1 + h2))))

    A = sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(Nr * Ntu, Nr * Ntu))
    return A, idx


def solve_profile(n: int, source, grid: RadialGrid, degree: int = 2,
                  far_field: str = "dirichlet", name: str | None = None) -> ProfileSolution:
    """Solve the reduced problem for one source (profile name or callable ``f(n, r, t)``)."""
    A, idx = assemble_reduced(n, grid, degree, far_field)
    Nr, Ntu = idx.shape
    R, Tn = np.meshgrid(grid.r_centers, grid.t_nodes, indexing="ij")
    src = reduced_source(source, n, R, Tn)
    b = src[:, :Ntu].copy()
    b[:, 0] = 0.0
    x = spsolve(A, b.ravel())
    res = A @ x - b.ravel()
    scale = max(np.abs(b).max(), np.finfo(float).tiny)
    w = np.zeros((Nr, grid.n_t + 1))
    w[:, :Ntu] = x.reshape(Nr, Ntu)
    label = name if name is not None else (source if isinstance(source, str) else "custom")
    w.setflags(write=False)
    src.setflags(write=False)
    return ProfileSolution(n, label, grid, w, src, degree, far_field,
                           float(np.abs(res).max() / scale))


_PROFILE_CACHE: dict = {}


def cached_profile(n: int, name: str, grid: RadialGrid, far_field: str = "dirichlet") -> ProfileSolution:
    """Profiles depend only on (n, source, grid); curvature enters through ``T`` alone."""
    key = (n, name, grid.key(), far_field)
    if key not in _PROFILE_CACHE:
        _PROFILE_CACHE[key] = solve_profile(n, name, grid, far_field=far_field, name=name)
    return _PROFILE_CACHE[key]


def clear_profile_cache() -> None:
    _PROFILE_CACHE.clear()


# ----------------------------------------------------------- full solution

def _sym_hessian_factors(z):
    r = np.linalg.norm(z, axis=-1)
    safe = np.where(r > 0, r, 1.0)
    zhat = z / safe[..., None]
    return r, zhat


@dataclass(frozen=True, eq=False)
class CorrectorSolution:
    n: int
    grid: RadialGrid
    sectors: tuple  # ((T, ProfileSolution), ...)
    curvature_hash: str
    tol: float
    kernel_coeffs: np.ndarray
    residuals: dict
    far_field: str = "dirichlet"

    @property
    def applied_coeffs(self) -> np.ndarray:
        """Kernel components actually subtracted; those below ``tol`` are a no-op."""
        return np.where(np.abs(self.kernel_coeffs) > self.tol, self.kernel_coeffs, 0.0)

    @property
    def is_zero(self) -> bool:
        return not self.sectors

    @property
    def reach(self) -> tuple:
        return self.grid.r_max, self.grid.t_max

    def _outside(self, y, outside):
        z, t = y[..., :-1], y[..., -1]
        r = np.linalg.norm(z, axis=-1)
        out = (r > self.grid.r_max) | (t > self.grid.t_max)
        if np.any(out) and outside == "raise":
            raise DomainError(f"{int(out.sum())} points lie beyond the solved domain")
        return out

    def eval(self, y, outside: str = "raise") -> np.ndarray:
        y = as_points(y, self.n)
        mask = self._outside(y, outside)
        z, t = y[..., :-1], y[..., -1]
        r = np.linalg.norm(z, axis=-1)
        out = np.zeros(y.shape[:-1])
        for T, prof in self.sectors:
            out += np.einsum("...i,ij,...j->...", z, T, z) * prof(r, t)
        out -= self._kernel_part(y)
        return np.where(mask, 0.0, out)

    def _kernel_part(self, y):
        out = np.zeros(y.shape[:-1])
        for b, c in enumerate(self.applied_coeffs, start=1):
            if c != 0.0:
                out += c * kernel(b, y, self.n)
        return out

    def derivatives(self, y, outside: str = "raise"):
        """``(v, grad v, Hessian v)`` from the spline representation of each profile."""
        y = as_points(y, self.n)
        mask = self._outside(y, outside)
        n, m = self.n, self.n - 1
        z, t = y[..., :-1], y[..., -1]
        r, zhat = _sym_hessian_factors(z)
        v = np.zeros(y.shape[:-1])
        g = np.zeros(y.shape)
        H = np.zeros(y.shape + (n,))
        small = r < 1e-8
        eye = np.eye(m)
        for T, prof in self.sectors:
            w = prof(r, t)
            wr = prof(r, t, 1, 0)
            wt = prof(r, t, 0, 1)
            wrr = prof(r, t, 2, 0)
            wtt = prof(r, t, 0, 2)
            wrt = prof(r, t, 1, 1)
            wr_over_r = np.where(small, wrr, wr / np.where(small, 1.0, r))
            Tz = z @ T
            Q = np.einsum("...i,...i->...", Tz, z)
            v += Q * w
            dw = wr[..., None] * zhat  # grad_z w
            g[..., :m] += 2.0 * Tz * w[..., None] + Q[..., None] * dw
            g[..., m] += Q * wt
            Hw = (wrr - wr_over_r)[..., None, None] * zhat[..., :, None] * zhat[..., None, :] \
                + wr_over_r[..., None, None] * eye
            H[..., :m, :m] += (2.0 * T * w[..., None, None]
                               + 2.0 * (Tz[..., :, None] * dw[..., None, :] + dw[..., :, None] * Tz[..., None, :])
                               + Q[..., None, None] * Hw)
            mixed = 2.0 * Tz * wt[..., None] + Q[..., None] * wrt[..., None] * zhat
            H[..., :m, m] += mixed
            H[..., m, :m] += mixed
            H[..., m, m] += Q * wtt
        if np.any(self.applied_coeffs != 0):
            raise NotImplementedError("derivatives with a nonzero kernel projection")
        v = np.where(mask, 0.0, v)
        g = np.where(mask[..., None], 0.0, g)
        H = np.where(mask[..., None, None], 0.0, H)
        return v, g, H

    def eval_family(self, y, delta: float, outside: str = "raise") -> np.ndarray:
        """``(v)_delta(y) = delta^{-(n-2)/2} v(y / delta)``."""
        if not delta > 0:
            raise DomainError(f"delta={delta} must be positive")
        y = as_points(y, self.n)
        return delta ** (-(self.n - 2) / 2.0) * self.eval(y / delta, outside=outside)


def _validate_tol(tol):
    if not tol > 0:
        raise ValueError(f"tol={tol} must be positive")


def _kernel_projection(sectors, n, grid):
    """Half-space L2 coefficients ``<v, j_b> / <j_b, j_b>`` by radial x degree-5 angular quadrature."""
    m = n - 1
    P, W = design5(m)
    rc, tn = grid.r_centers, grid.t_nodes
    R, Tt = np.meshgrid(rc, tn, indexing="ij")
    D = (1.0 + Tt) ** 2 + R * R
    coeffs = np.zeros(n)
    defects = np.zeros(n)
    tw = grid.t_weights()
    # j_b = -(n-2) z_b D^{-n/2} = r theta_b k1(r,t);  j_n = k0(r,t)
    k1 = -(n - 2) * D ** (-n / 2.0)
    k0 = 0.5 * (n - 2) * D ** (-n / 2.0) * (1.0 - Tt * Tt - R * R)
    for b in range(1, n + 1):
        if b < n:
            ang_jj = float(W @ P[:, b - 1] ** 2)
            rad_jj = grid.cell_volumes(m - 1 + 2) @ (k1 ** 2) @ tw
            inner = 0.0
            for T, prof in sectors:
                Q = np.einsum("qi,ij,qj->q", P, T, P)
                ang = float(W @ (Q * P[:, b - 1]))
                inner += ang * (grid.cell_volumes(m - 1 + 3) @ (prof.w * k1) @ tw)
        else:
            ang_jj = float(W.sum())
            rad_jj = grid.cell_volumes(m - 1) @ (k0 ** 2) @ tw
            inner = 0.0
            for T, prof in sectors:
                Q = np.einsum("qi,ij,qj->q", P, T, P)
                ang = float(W @ Q)
                inner += ang * (grid.cell_volumes(m - 1 + 2) @ (prof.w * k0) @ tw)
        defects[b - 1] = inner
        coeffs[b - 1] = inner / (ang_jj * rad_jj)
    return coeffs, defects


def solve_corrector(curv: CurvatureData, grid: RadialGrid | None = None, tol: float = 1e-8,
                    far_field: str = "dirichlet", project: bool = True) -> CorrectorSolution:
    """Solve the corrector problem for ``curv`` sector by sector.

    Only harmonic-degree-2 sectors are supported; data with a nonzero
    isotropic part (nonvanishing traces) is rejected.
    """
    _validate_tol(tol)
    grid = grid or RadialGrid()
    dec: SectorDecomposition = sector_decompose(curv)
    if dec.isotropic:
        raise DomainError("curvature data has nonzero trace parts; the corrector needs admissible data")
    sectors = []
    worst = 0.0
    for s in dec.sectors:
        prof = cached_profile(curv.n, s.profile, grid, far_field)
        worst = max(worst, prof.algebraic_residual)
        sectors.append((s.T, prof))
    if worst > tol:
        raise SolverError(f"algebraic residual {worst:.2e} above tol {tol:.2e}")
    sectors = tuple(sectors)
    coeffs, defects = _kernel_projection(sectors, curv.n, grid)
    if not project:
        coeffs = np.zeros_like(coeffs)
    residuals = {"algebraic": worst, "kernel_defect_max": float(np.abs(defects).max(initial=0.0))}
    coeffs.setflags(write=False)
    return CorrectorSolution(curv.n, grid, sectors, curv.content_hash(), tol, coeffs,
                             residuals, far_field)


# ---------------------------------------------------------------- integrals

def _pair_angles(sectors, m):
    P, W = design5(m)
    Qs = [np.einsum("qi,ij,qj->q", P, T, P) for T, _ in sectors]
    quart = np.array([[W @ (a * b) for b in Qs] for a in Qs])
    quad = np.array([[W @ np.einsum("qi,ij,jk,qk->q", P, Ta, Tb, P) for Tb, _ in sectors]
                     for Ta, _ in sectors])
    return quart, quad


def v_lap_v(sol: CorrectorSolution) -> float:
    """``int_{R^n_+} v Laplacian v = -int v f`` on the grid."""
    if sol.is_zero:
        return 0.0
    quart, _ = _pair_angles(sol.sectors, sol.n - 1)
    tw = sol.grid.t_weights()
    total = 0.0
    for a, (_, pa) in enumerate(sol.sectors):
        V = sol.grid.cell_volumes(pa.weight_power)
        for b, (_, pb) in enumerate(sol.sectors):
            total -= quart[a, b] * float(V @ (pa.w * pb.source) @ tw)
    return total


def v_lap_v_by_parts(sol: CorrectorSolution) -> float:
    """Same integral through ``-int |grad v|^2 + n int_{t=0} U^{2/(n-2)} v^2``."""
    if sol.is_zero:
        return 0.0
    n, m = sol.n, sol.n - 1
    g = sol.grid
    quart, quad = _pair_angles(sol.sectors, m)
    rc, tn = g.r_centers, g.t_nodes
    tw = g.t_weights()
    derivs = []
    for _, p in sol.sectors:
        wr = np.gradient(p.w, rc, axis=0, edge_order=2)
        wt = np.gradient(p.w, tn, axis=1, edge_order=2)
        derivs.append((p.w, wr, wt))
    grad = 0.0
    bdry = 0.0
    for a in range(len(sol.sectors)):
        wa, ra, ta = derivs[a]
        for b in range(len(sol.sectors)):
            wb, rb, tb = derivs[b]
            term = (4.0 * quad[a, b] * g.cell_volumes(m - 1 + 2)[:, None] * wa * wb
                    + quart[a, b] * g.cell_volumes(m - 1 + 3)[:, None] * (wa * rb + ra * wb) * 2.0
                    + quart[a, b] * g.cell_volumes(m - 1 + 4)[:, None] * (ra * rb + ta * tb))
            grad += float(term.sum(axis=0) @ tw)
            bdry += quart[a, b] * float(g.cell_volumes(m - 1 + 4) @ (wa[:, 0] * wb[:, 0] / (1 + rc ** 2)))
    return -grad + n * bdry


def boundary_moments(sol: CorrectorSolution):
    """``(int_{t=0} U^{n/(n-2)} v dz, ||v(., 0)||_{L^2})``."""
    if sol.is_zero:
        return 0.0, 0.0
    n, m = sol.n, sol.n - 1
    g = sol.grid
    P, W = design5(m)
    quart, _ = _pair_angles(sol.sectors, m)
    rc = g.r_centers
    Un = (1.0 + rc ** 2) ** (-n / 2.0)
    integral = 0.0
    for T, p in sol.sectors:
        ang = float(W @ np.einsum("qi,ij,qj->q", P, T, P))
        integral += ang * float(g.cell_volumes(m - 1 + 2) @ (Un * p.w[:, 0]))
    sq = 0.0
    for a, (_, pa) in enumerate(sol.sectors):
        for b, (_, pb) in enumerate(sol.sectors):
            sq += quart[a, b] * float(g.cell_volumes(m - 1 + 4) @ (pa.w[:, 0] * pb.w[:, 0]))
    return integral, float(np.sqrt(max(sq, 0.0)))


def boundary_new_identity(sol: CorrectorSolution) -> float:
    """Boundary version of the energy identity: ``int_{t=0} v f dz`` (``f`` vanishes there)."""
    if sol.is_zero:
        return 0.0
    P, W = design5(sol.n - 1)
    out = 0.0
    for T, p in sol.sectors:
        out += float(W @ np.einsum("qi,ij,qj->q", P, T, P) ** 2) * float(
            sol.grid.cell_volumes(sol.n + 2) @ (p.w[:, 0] * p.source[:, 0]))
    return out


def fit_loglog(x, y):
    x, y = np.log(np.asarray(x)), np.log(np.asarray(y))
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(coef[0])


def decay_exponents(sol: CorrectorSolution, rho_min: float = 32.0, shells: int = 3,
                    n_radial: int = 12, n_polar: int = 16) -> dict:
    """Log-log slopes of shell suprema of ``|v|``, ``|grad v|``, ``|Hess v|``.

    Shells are dyadic, ``[rho_min 2^k, rho_min 2^{k+1}]``; directions are the
    degree-5 design nodes, which include every eigen-axis pair of the sectors.
    """
    if sol.is_zero:
        return {0: float("nan"), 1: float("nan"), 2: float("nan")}
    m = sol.n - 1
    P, _ = design5(m)
    dirs = [P]
    for T, _ in sol.sectors:
        dirs.append(np.linalg.eigh(T)[1].T)
    dirs = np.vstack(dirs)
    alpha = np.linspace(0.0, 0.5 * np.pi, n_polar)
    centers, sups = [], {0: [], 1: [], 2: []}
    for k in range(shells + 1):
        lo = rho_min * 2.0 ** k
        rho = lo * 2.0 ** (np.arange(n_radial) / n_radial)
        rr = (rho[:, None] * np.cos(alpha)[None, :]).ravel()
        tt = (rho[:, None] * np.sin(alpha)[None, :]).ravel()
        y = np.concatenate([np.hstack([rr[:, None] * d[None, :], tt[:, None]]) for d in dirs])
        v, g, H = sol.derivatives(y)
        centers.append(lo)
        sups[0].append(np.abs(v).max())
        sups[1].append(np.linalg.norm(g, axis=-1).max())
        sups[2].append(np.linalg.norm(H, axis=(-2, -1)).max())
    return {tau: fit_loglog(centers, s) for tau, s in sups.items()}


def richardson_order(n: int, grid: RadialGrid, name: str = "normal_aniso", levels: int = 3):
    """Observed order of the energy integral on grids ``grid / 2^k``."""
    grids = [grid.coarsened(2 ** (levels - 1 - k)) for k in range(levels)]
    e = [cached_profile(n, name, g).energy() for g in grids]
    orders = [float(np.log2(abs(e[k] - e[k + 1]) / abs(e[k + 1] - e[k + 2])))
              for k in range(levels - 2)]
    extrap = e[-1] + (e[-1] - e[-2]) / (2 ** orders[-1] - 1)
    return {"energies": e, "orders": orders, "extrapolated": float(extrap)}


def manufactured_errors(n: int, sizes=(100, 200, 400), extent: float = 40.0, beta: float = 6.0):
    """Max-norm errors for the exact profile ``w = D^{-n/2}`` and observed orders.

    This ``w`` satisfies the Robin row exactly; its source is ``2n D^{-n/2-1}``.
    """
    a = n / 2.0

    def exact(r, t):
        return ((1 + t) ** 2 + r ** 2) ** (-a)

    def source(n_, r, t):
        return 2 * a * (n + 2 - 2 * a) * ((1 + t) ** 2 + r ** 2) ** (-a - 1)

    errs = []
    for N in sizes:
        g = RadialGrid(N, N, extent, extent, beta, beta)
        p = solve_profile(n, source, g)
        R, T = np.meshgrid(g.r_centers, g.t_nodes, indexing="ij")
        errs.append(float(np.abs(p.w - exact(R, T))[:, :-1].max()))
    orders = [float(np.log(errs[k] / errs[k + 1]) / np.log(sizes[k + 1] / sizes[k]))
              for k in range(len(errs) - 1)]
    return errs, orders


@dataclass
class PropertyReport:
    uvq_integral: float
    v_norm: float
    v_lap_v: float
    v_lap_v_by_parts: float
    boundary_identity: float
    decay_exponents: dict
    kernel_defects: float
    zero: bool = False

    def expected_decay(self, n):
        return {tau: 4 - tau - n for tau in (0, 1, 2)}


def check_properties(sol: CorrectorSolution, **decay_kw) -> PropertyReport:
    uvq, vn = boundary_moments(sol)
    return PropertyReport(
        uvq_integral=uvq,
        v_norm=vn,
        v_lap_v=v_lap_v(sol),
        v_lap_v_by_parts=v_lap_v_by_parts(sol),
        boundary_identity=boundary_new_identity(sol),
        decay_exponents=decay_exponents(sol, **decay_kw),
        kernel_defects=sol.residuals.get("kernel_defect_max", 0.0),
        zero=sol.is_zero,
    )


# ------------------------------------------------- sector-reduction oracle

def reduced_operator(w_fun, n: int, r, t, degree: int = 2, h: float = 1e-4):
    """``w_rr + ((n-2+2 degree)/r) w_r + w_tt`` by central differences of ``w_fun``."""
    M = n - 2 + 2 * degree
    wrr = (w_fun(r + h, t) - 2 * w_fun(r, t) + w_fun(r - h, t)) / h ** 2
    wr = (w_fun(r + h, t) - w_fun(r - h, t)) / (2 * h)
    wtt = (w_fun(r, t + h) - 2 * w_fun(r, t) + w_fun(r, t - h)) / h ** 2
    return wrr + M / r * wr + wtt


def brute_force_laplacian(fun, y, h: float) -> np.ndarray:
    """n-dimensional central-difference Laplacian of a scalar field."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    f0 = fun(y)
    out = np.zeros(len(y))
    for k in range(y.shape[-1]):
        e = np.zeros(y.shape[-1])
        e[k] = h
        out += fun(y + e) - 2 * f0 + fun(y - e)
    return out / h ** 2


# ------------------------------------------------------------------- cache

def cache_key(curv: CurvatureData, grid: RadialGrid, tol: float, far_field: str = "dirichlet") -> str:
    h = hashlib.sha256()
    h.update(f"v{CACHE_FORMAT};{curv.content_hash()};{grid.key()!r};{tol!r};{far_field}".encode())
    return h.hexdigest()


def save_solution(sol: CorrectorSolution, path, key: str) -> None:
    arrays = {
        "header": np.array([f"yamabe_blowup-corrector;format={CACHE_FORMAT};version={__version__}"]),
        "key": np.array([key]),
        "n": np.array(sol.n),
        "grid": np.array(sol.grid.key(), dtype=float),
        "tol": np.array(sol.tol),
        "curvature_hash": np.array([sol.curvature_hash]),
        "far_field": np.array([sol.far_field]),
        "kernel_coeffs": np.asarray(sol.kernel_coeffs),
        "residual_names": np.array(sorted(sol.residuals)),
        "residual_values": np.array([sol.residuals[k] for k in sorted(sol.residuals)]),
        "n_sectors": np.array(len(sol.sectors)),
    }
    for s, (T, p) in enumerate(sol.sectors):
        arrays[f"T{s}"] = T
        arrays[f"w{s}"] = p.w
        arrays[f"src{s}"] = p.source
        arrays[f"name{s}"] = np.array([p.name])
        arrays[f"res{s}"] = np.array(p.algebraic_residual)
    payload = io.BytesIO()
    np.savez(payload, **arrays)
    data = payload.getvalue()
    digest = hashlib.sha256(data).hexdigest().encode()
    with open(path, "wb") as fh:
        fh.write(digest + b"\n" + data)


class CacheCorruption(RuntimeError):
    pass


def load_solution(path, key: str | None = None) -> CorrectorSolution:
    with open(path, "rb") as fh:
        raw = fh.read()
    digest, _, data = raw.partition(b"\n")
    if hashlib.sha256(data).hexdigest().encode() != digest:
        raise CacheCorruption(f"checksum mismatch in {path}")
    z = np.load(io.BytesIO(data), allow_pickle=False)
    header = str(z["header"][0])
    if f"format={CACHE_FORMAT}" not in header:
        raise CacheCorruption(f"unsupported cache format: {header}")
    if key is not None and str(z["key"][0]) != key:
        raise CacheCorruption("cache key does not match request")
    gk = z["grid"]
    grid = RadialGrid(int(gk[0]), int(gk[1]), *map(float, gk[2:]))
    n = int(z["n"])
    far = str(z["far_field"][0])
    sectors = []
    for s in range(int(z["n_sectors"])):
        w = z[f"w{s}"]
        src = z[f"src{s}"]
        w.setflags(write=False)
        src.setflags(write=False)
        prof = ProfileSolution(n, str(z[f"name{s}"][0]), grid, w, src, 2, far, float(z[f"res{s}"]))
        T = z[f"T{s}"]
        T.setflags(write=False)
        sectors.append((T, prof))
    res = dict(zip(map(str, z["residual_names"]), map(float, z["residual_values"])))
    coeffs = z["kernel_coeffs"]
    coeffs.setflags(write=False)
    return CorrectorSolution(n, grid, tuple(sectors), str(z["curvature_hash"][0]), float(z["tol"]),
                             coeffs, res, far)
