"""Curvature data at the blow-up point and the Fermi-coordinate metric model.

Tangential indices run over ``0..m-1`` with ``m = n - 1``; the normal index
is implicit.  ``rbar[i, k, j, l]`` stores the boundary curvature tensor in the
index order used by the metric expansion, so the quadratic metric term reads
``rbar[i, k, j, l] z_k z_l / 3``.  ``rnn[i, j]`` stores ``R_{ninj}``.

Optional derivative tensors carry the derivative indices last, e.g.
``rbar_d[i, k, j, l, m]`` is ``R_{ikjl,m}`` and ``rnn_dk[i, j, k]`` is
``R_{ninj,k}``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
import numpy as np

from . import bubble as _bubble
from .bubble import DomainError, as_points, check_dimension

SYMMETRY_TOL = 1e-12

# derivative tensors: name -> (number of extra tangential indices, source tensor)
_OPTIONAL = {
    "rbar_d": 5,
    "rbar_dd": 6,
    "rnn_dk": 3,
    "rnn_dn": 2,
    "rnn_dkl": 4,
    "rnn_dnk": 3,
    "rnn_dnn": 2,
}


@dataclass(frozen=True, eq=False)
class CurvatureData:
    n: int
    rbar: np.ndarray
    rnn: np.ndarray
    rbar_d: np.ndarray | None = None
    rbar_dd: np.ndarray | None = None
    rnn_dk: np.ndarray | None = None
    rnn_dn: np.ndarray | None = None
    rnn_dkl: np.ndarray | None = None
    rnn_dnk: np.ndarray | None = None
    rnn_dnn: np.ndarray | None = None
    h_coeff: float = 0.0
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        n = check_dimension(self.n)
        m = n - 1
        object.__setattr__(self, "n", n)
        for name, rank in [("rbar", 4), ("rnn", 2)] + list(_OPTIONAL.items()):
            arr = getattr(self, name)
            if arr is None:
                continue
            arr = np.array(arr, dtype=float)
            if arr.shape != (m,) * rank:
                raise ValueError(f"{name} has shape {arr.shape}, expected {(m,) * rank}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "h_coeff", float(self.h_coeff))

    @property
    def m(self) -> int:
        return self.n - 1

    @classmethod
    def zero(cls, n: int) -> "CurvatureData":
        m = check_dimension(n) - 1
        return cls(n, np.zeros((m,) * 4), np.zeros((m, m)))

    def tensors(self) -> dict:
        out = {"rbar": self.rbar, "rnn": self.rnn}
        out.update({k: getattr(self, k) for k in _OPTIONAL if getattr(self, k) is not None})
        return out

    def scaled(self, s: float) -> "CurvatureData":
        """Multiply every curvature quantity (and the mean-curvature model) by ``s``.

        Product terms of the metric expansion then scale by ``s**2``.
        """
        kw = {k: s * v for k, v in self.tensors().items()}
        return replace(self, h_coeff=s * self.h_coeff, provenance=dict(self.provenance), **kw)

    def without_rbar(self) -> "CurvatureData":
        return replace(self, rbar=np.zeros_like(self.rbar), provenance=dict(self.provenance))

    def rotated(self, Q: np.ndarray) -> "CurvatureData":
        """Apply the orthogonal map ``Q`` to every tangential index."""
        Q = np.asarray(Q, dtype=float)
        if Q.shape != (self.m, self.m) or not np.allclose(Q @ Q.T, np.eye(self.m), atol=1e-12):
            raise ValueError("Q must be an orthogonal (n-1)x(n-1) matrix")
        kw = {}
        for k, v in self.tensors().items():
            for axis in range(v.ndim):
                v = np.moveaxis(np.tensordot(Q, v, axes=([1], [axis])), 0, axis)
            kw[k] = v
        return replace(self, provenance=dict(self.provenance), **kw)

    def __add__(self, other: "CurvatureData") -> "CurvatureData":
        if other.n != self.n:
            raise ValueError("dimension mismatch")
        a, b = self.tensors(), other.tensors()
        kw = {k: a.get(k, 0) + b.get(k, 0) for k in set(a) | set(b)}
        return CurvatureData(self.n, h_coeff=self.h_coeff + other.h_coeff, **kw)

    def to_dict(self) -> dict:
        """Plain-data form; tensors are flattened row-major in stored index order."""
        d = {"n": self.n, "h_coeff": self.h_coeff, "provenance": dict(self.provenance)}
        for k, v in self.tensors().items():
            d[k] = v.ravel().tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CurvatureData":
        n = int(d["n"])
        m = n - 1
        kw = {}
        for name, rank in [("rbar", 4), ("rnn", 2)] + list(_OPTIONAL.items()):
            if d.get(name) is not None:
                kw[name] = np.asarray(d[name], dtype=float).reshape((m,) * rank)
        return cls(n, h_coeff=float(d.get("h_coeff", 0.0)),
                   provenance=dict(d.get("provenance", {})), **kw)

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(f"n={self.n};h={self.h_coeff!r}".encode())
        for k, v in sorted(self.tensors().items()):
            h.update(k.encode())
            h.update(np.ascontiguousarray(v, dtype="<f8").tobytes())
        return h.hexdigest()


def save_curvature(curv: CurvatureData, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(curv.to_dict(), fh, indent=1, sort_keys=True)


def load_curvature(path) -> CurvatureData:
    with open(path, encoding="utf-8") as fh:
        return CurvatureData.from_dict(json.load(fh))


# ---------------------------------------------------------------- symmetries

@dataclass
class ValidationReport:
    deviations: dict
    tol: float = SYMMETRY_TOL

    @property
    def passed(self) -> bool:
        return all(v < self.tol for v in self.deviations.values())

    def violations(self) -> dict:
        return {k: v for k, v in self.deviations.items() if not v < self.tol}

    def __str__(self):
        lines = [f"{k:>18s}: {v:.3e} {'ok' if v < self.tol else 'VIOLATED'}"
                 for k, v in self.deviations.items()]
        return "\n".join(lines)


def ricci(rbar: np.ndarray) -> np.ndarray:
    """Trace over the first and third slots, ``sum_i R_{ikil}``."""
    return np.einsum("ikil->kl", rbar)


def _bianchi(R):
    # R_ikjl + R_ijlk + R_iljk, cyclic in the last three slots
    return R + R.transpose(0, 2, 3, 1) + R.transpose(0, 3, 1, 2)


def validate(curv: CurvatureData) -> ValidationReport:
    R, N = curv.rbar, curv.rnn
    dev = {
        "antisym_ik": np.abs(R + R.transpose(1, 0, 2, 3)).max(initial=0.0),
        "antisym_jl": np.abs(R + R.transpose(0, 1, 3, 2)).max(initial=0.0),
        "pair_symmetry": np.abs(R - R.transpose(2, 3, 0, 1)).max(initial=0.0),
        "first_bianchi": np.abs(_bianchi(R)).max(initial=0.0),
        "ricci_trace": np.abs(ricci(R)).max(initial=0.0),
        "rnn_symmetry": np.abs(N - N.T).max(initial=0.0),
        "rnn_trace": abs(np.trace(N)),
    }
    return ValidationReport({k: float(v) for k, v in dev.items()})


def riemann_project(A: np.ndarray) -> np.ndarray:
    """Project a rank-4 array onto tensors with the algebraic Riemann symmetries."""
    R = A - A.transpose(1, 0, 2, 3)
    R = R - R.transpose(0, 1, 3, 2)
    R = R + R.transpose(2, 3, 0, 1)
    return R - _bianchi(R) / 3.0


def kulkarni_nomizu(h: np.ndarray, k: np.ndarray) -> np.ndarray:
    return (np.einsum("ac,bd->abcd", h, k) + np.einsum("bd,ac->abcd", h, k)
            - np.einsum("ad,bc->abcd", h, k) - np.einsum("bc,ad->abcd", h, k))


def weyl_part(R: np.ndarray) -> np.ndarray:
    """Remove the Ricci part of an algebraic curvature tensor (``m >= 3``)."""
    m = R.shape[0]
    if m < 3:
        raise DomainError("Weyl projection needs at least 3 tangential dimensions")
    Ric = ricci(R)
    scal = np.trace(Ric)
    schouten = (Ric - scal / (2.0 * (m - 1)) * np.eye(m)) / (m - 2)
    return R - kulkarni_nomizu(schouten, np.eye(m))


def _normalized(a: np.ndarray, scale: float) -> np.ndarray:
    nrm = np.linalg.norm(a)
    return a if nrm == 0 else a * (scale / nrm)


def _sym_traceless(a):
    a = 0.5 * (a + a.T)
    return a - np.trace(a) / a.shape[0] * np.eye(a.shape[0])


def random_admissible(seed: int, scale: float = 1.0, n: int = 8,
                      higher_order: bool = False) -> CurvatureData:
    """Deterministic random curvature data satisfying every admissibility invariant.

    ``rbar`` is a Weyl-type tensor (Riemann symmetries, vanishing Ricci
    traces) and ``rnn`` a symmetric traceless matrix, each with Frobenius norm
    ``scale``.  With ``higher_order`` the cubic-order Fermi tensors
    (``rbar_d``, ``rnn_dk``, ``rnn_dn``) and a mean-curvature coefficient
    ``h_coeff = scale`` are drawn as well.
    """
    if not scale > 0:
        raise ValueError(f"scale={scale} must be positive")
    n = check_dimension(n, 5)
    m = n - 1
    rng = np.random.default_rng(seed)
    rbar = _normalized(weyl_part(riemann_project(rng.standard_normal((m,) * 4))), scale)
    rnn = _normalized(_sym_traceless(rng.standard_normal((m, m))), scale)
    kw = {}
    if higher_order:
        A = rng.standard_normal((m,) * 5)
        rbar_d = np.stack([weyl_part(riemann_project(A[..., c])) for c in range(m)], axis=-1)
        kw["rbar_d"] = _normalized(rbar_d, scale)
        B = rng.standard_normal((m, m, m))
        kw["rnn_dk"] = _normalized(B + B.transpose(1, 0, 2), scale)
        kw["rnn_dn"] = _normalized(_sym_traceless(rng.standard_normal((m, m))), scale)
        kw["h_coeff"] = scale
    prov = {"seed": int(seed), "scale": float(scale), "higher_order": bool(higher_order)}
    return CurvatureData(n, rbar, rnn, provenance=prov, **kw)


def weyl_norm_sq(curv: CurvatureData) -> float:
    """Squared norm of the boundary Weyl tensor at the blow-up point.

    The Ricci traces vanish there, so the Weyl projection is the identity and
    this is the full squared Frobenius norm of ``rbar``.  Swap this function to
    change the convention.
    """
    return float(np.sum(curv.rbar ** 2))


def rnn_norm_sq(curv: CurvatureData) -> float:
    return float(np.sum(curv.rnn ** 2))


# ------------------------------------------------------------- metric model

def _chunks(N, size):
    for s in range(0, N, size):
        yield slice(s, min(N, s + size))


def _contract(C: np.ndarray, z: np.ndarray) -> np.ndarray:
    """``C[..., k1..kp] z_k1 .. z_kp`` for a batch ``z`` of shape (N, m)."""
    p = C.ndim - 2
    out = np.tensordot(z, C, axes=([1], [C.ndim - 1]))
    for _ in range(p - 1):
        out = np.einsum("N...k,Nk->N...", out, z)
    return out


def _poly_value(C, z, chunk=2048):
    out = np.empty((len(z),) + C.shape[:2])
    step = max(1, chunk // C.shape[0] ** max(0, C.ndim - 4))
    for s in _chunks(len(z), step):
        out[s] = _contract(C, z[s])
    return out


def _poly_divergence(C, z, chunk=2048):
    """``sum_i d/dz_i (C[i, j, k..] z_k ..)`` for a coefficient tensor ``C``."""
    p = C.ndim - 2
    out = np.zeros((len(z), C.shape[1]))
    for slot in range(p):
        # trace first axis against slot ``2 + slot``
        Ct = np.trace(C, axis1=0, axis2=2 + slot)  # shape (m,) + (m,)*(p-1)
        if p == 1:
            out += Ct[None, :]
        else:
            step = max(1, chunk // C.shape[0] ** max(0, Ct.ndim - 3))
            for s in _chunks(len(z), step):
                v = np.tensordot(z[s], Ct, axes=([1], [Ct.ndim - 1]))
                for _ in range(p - 2):
                    v = np.einsum("N...k,Nk->N...", v, z[s])
                out[s] += v
    return out


def _poly_terms(curv: CurvatureData):
    """Pure polynomial terms of the inverse-metric expansion as ``(order, coeff, C, tpow)``.

    ``C`` is arranged as ``[i, j, k1, .., kp]``; the term equals
    ``coeff * t**tpow * C[i, j, k..] z_k ..``.
    """
    terms = [(2, 1.0 / 3.0, curv.rbar.transpose(0, 2, 1, 3), 0)]
    if curv.rbar_d is not None:
        terms.append((3, 1.0 / 6.0, curv.rbar_d.transpose(0, 2, 1, 3, 4), 0))
    if curv.rnn_dk is not None:
        terms.append((3, 1.0, curv.rnn_dk, 2))
    if curv.rbar_dd is not None:
        terms.append((4, 1.0 / 20.0, curv.rbar_dd.transpose(0, 2, 1, 3, 4, 5), 0))
    if curv.rnn_dkl is not None:
        terms.append((4, 0.5, curv.rnn_dkl, 2))
    if curv.rnn_dnk is not None:
        terms.append((4, 1.0 / 3.0, curv.rnn_dnk, 3))
    return terms


def _flatten(y):
    y = np.asarray(y, dtype=float)
    return y.reshape(-1, y.shape[-1]), y.shape[:-1]


def metric_orders(curv: CurvatureData, y) -> dict:
    """Tangential block of ``g^{ij} - delta_ij`` split by polynomial order 2, 3, 4."""
    y = as_points(y, curv.n)
    Y, shape = _flatten(y)
    z, t = Y[:, :-1], Y[:, -1]
    m = curv.m
    out = {k: np.zeros((len(Y), m, m)) for k in (2, 3, 4)}
    for order, coeff, C, tp in _poly_terms(curv):
        out[order] += coeff * t[:, None, None] ** tp * _poly_value(C, z)
    N = curv.rnn
    out[2] += t[:, None, None] ** 2 * N
    if curv.rnn_dn is not None:
        out[3] += t[:, None, None] ** 3 * curv.rnn_dn / 3.0
    P = _poly_value(curv.rbar.transpose(0, 2, 1, 3), z)
    out[4] += np.einsum("Nis,Njs->Nij", P, P) / 15.0
    PN = P @ N
    out[4] += t[:, None, None] ** 2 * (PN + PN.transpose(0, 2, 1)) / 6.0
    nn = 8.0 * N @ N
    if curv.rnn_dnn is not None:
        nn = nn + curv.rnn_dnn
    out[4] += t[:, None, None] ** 4 * nn / 12.0
    return {k: v.reshape(shape + (m, m)) for k, v in out.items()}


def metric_divergence(curv: CurvatureData, y) -> dict:
    """``sum_i d_i g^{ij}`` over tangential ``i``, split by the order of the metric term."""
    y = as_points(y, curv.n)
    Y, shape = _flatten(y)
    z, t = Y[:, :-1], Y[:, -1]
    m = curv.m
    out = {k: np.zeros((len(Y), m)) for k in (2, 3, 4)}
    for order, coeff, C, tp in _poly_terms(curv):
        out[order] += coeff * t[:, None] ** tp * _poly_divergence(C, z)
    N = curv.rnn
    Rt = curv.rbar.transpose(0, 2, 1, 3)  # [i, s, k, l]
    P = _poly_value(Rt, z)
    # dP_is/dz_a = R_iasl z_l + R_iksa z_k
    D = np.einsum("isal,Nl->Nisa", Rt, z) + np.einsum("iska,Nk->Nisa", Rt, z)
    trD = np.einsum("Nisi->Ns", D)
    out[4] += (np.einsum("Ns,Njs->Nj", trD, P) + np.einsum("Nis,Njsi->Nj", P, D)) / 15.0
    sym = np.einsum("Ns,sj->Nj", trD, N) + np.einsum("is,Nsji->Nj", N, D)
    out[4] += t[:, None] ** 2 * sym / 6.0
    return {k: v.reshape(shape + (m,)) for k, v in out.items()}


def metric_inverse(curv: CurvatureData, y) -> np.ndarray:
    """Fourth-order Fermi expansion of the inverse metric, ``n x n`` per point.

    The normal row and column are those of the identity.
    """
    y = as_points(y, curv.n)
    parts = metric_orders(curv, y)
    n, m = curv.n, curv.m
    g = np.zeros(y.shape[:-1] + (n, n))
    g[..., :m, :m] = parts[2] + parts[3] + parts[4]
    g += np.eye(n)
    return g


def metric_det(y) -> np.ndarray:
    """Volume density of the conformal Fermi chart; identically one in this model."""
    y = np.asarray(y, dtype=float)
    return np.ones(y.shape[:-1])


def mean_curvature_model(y, c_h: float = 1.0, exponent: float = 3.0) -> np.ndarray:
    """Mean curvature ``c_h |y|**exponent``; ``exponent=3`` vanishes to second order."""
    y = np.asarray(y, dtype=float)
    return c_h * np.linalg.norm(y, axis=-1) ** exponent


def scalar_curvature_model(curv: CurvatureData, y, normal_coeff: float = 0.0) -> np.ndarray:
    """Quadratic scalar-curvature model ``-a |z|^2 + c t^2``.

    ``a = |W|^2 / (12 (n-1))`` makes the tangential Laplacian at the origin equal
    ``-|W|^2 / 6``.
    """
    y = np.asarray(y, dtype=float)
    a = weyl_norm_sq(curv) / (12.0 * curv.m)
    z, t = y[..., :-1], y[..., -1]
    return -a * np.sum(z * z, axis=-1) + normal_coeff * t * t


def _term_norms(curv: CurvatureData):
    """Bounds ``c_k`` with ``|g(y) - I|_2 <= sum_k c_k |y|^k``."""
    c = {2: 0.0, 3: 0.0, 4: 0.0}
    for order, coeff, C, tp in _poly_terms(curv):
        c[order] += abs(coeff) * np.linalg.norm(C)
    Rn = np.linalg.norm(curv.rbar)
    Nn = np.linalg.norm(curv.rnn)
    c[2] += Nn
    if curv.rnn_dn is not None:
        c[3] += np.linalg.norm(curv.rnn_dn) / 3.0
    c[4] += Rn * Rn / 15.0 + Rn * Nn / 3.0 + 8.0 * Nn * Nn / 12.0
    if curv.rnn_dnn is not None:
        c[4] += np.linalg.norm(curv.rnn_dnn) / 12.0
    return c


def spd_radius(curv: CurvatureData) -> float:
    """Radius below which the truncated inverse metric is provably positive definite."""
    c = _term_norms(curv)
    if not any(c.values()):
        return np.inf
    roots = np.roots([c[4], c[3], c[2], 0.0, 0.0, -1.0])
    real = roots[np.isreal(roots)].real
    return float(real[real > 0].min())


# -------------------------------------------------- corrector right-hand side

def rhs_corrector(curv: CurvatureData, y) -> np.ndarray:
    """``[rbar_ikjl z_k z_l / 3 + R_ninj t^2] d_ij U`` by explicit contraction."""
    y = as_points(y, curv.n)
    Y, shape = _flatten(y)
    z, t = Y[:, :-1], Y[:, -1]
    m = curv.m
    H = _bubble.bubble_hessian(Y, curv.n)[:, :m, :m]
    quad = _poly_value(curv.rbar.transpose(0, 2, 1, 3), z) / 3.0
    quad += t[:, None, None] ** 2 * curv.rnn
    return np.einsum("Nij,Nij->N", quad, H).reshape(shape)


def _denom(n, r, t):
    return (1.0 + t) ** 2 + r * r


def _p_normal_aniso(n, r, t):
    return n * (n - 2) * t * t * _denom(n, r, t) ** (-(n + 2) / 2.0)


def _p_tangential_iso(n, r, t):
    return -(n - 2) * _denom(n, r, t) ** (-n / 2.0)


def _p_normal_trace(n, r, t):
    m = n - 1
    D = _denom(n, r, t)
    return -(n - 2) * t * t * D ** (-n / 2.0) + n * (n - 2) / m * r * r * t * t * D ** (-(n + 2) / 2.0)


def _p_tangential_trace(n, r, t):
    return r * r * _p_tangential_iso(n, r, t) / (3.0 * (n - 1))


PROFILES = {
    "normal_aniso": _p_normal_aniso,
    "tangential_iso": _p_tangential_iso,
    "normal_trace": _p_normal_trace,
    "tangential_trace": _p_tangential_trace,
}


def profile(name: str, n: int, r, t):
    return PROFILES[name](n, np.asarray(r, dtype=float), np.asarray(t, dtype=float))


@dataclass(frozen=True)
class Sector:
    T: np.ndarray
    profile: str


@dataclass(frozen=True)
class SectorDecomposition:
    """``rhs = sum T_ij z_i z_j h(r, t) + h0(r, t)`` with traceless symmetric ``T``."""

    n: int
    sectors: tuple
    isotropic: tuple = ()  # ((coefficient, profile name), ...)

    def h0(self, r, t):
        out = np.zeros(np.broadcast(np.asarray(r), np.asarray(t)).shape)
        for coef, name in self.isotropic:
            out = out + coef * profile(name, self.n, r, t)
        return out

    def evaluate(self, y) -> np.ndarray:
        y = as_points(y, self.n)
        z, t = y[..., :-1], y[..., -1]
        r = np.linalg.norm(z, axis=-1)
        out = self.h0(r, t)
        for s in self.sectors:
            out = out + np.einsum("...i,ij,...j->...", z, s.T, z) * profile(s.profile, self.n, r, t)
        return out

    @property
    def is_empty(self) -> bool:
        return not self.sectors and not self.isotropic


def sector_decompose(curv: CurvatureData, atol: float | None = None) -> SectorDecomposition:
    """Split the corrector forcing into harmonic-degree-2 sectors plus an isotropic rest.

    For admissible data the ``rbar`` contribution vanishes identically and the
    single sector is ``(rnn, n(n-2) t^2 D^{-(n+2)/2})``.
    """
    n, m = curv.n, curv.m
    if atol is None:
        atol = 1e-12 * (np.linalg.norm(curv.rbar) + np.linalg.norm(curv.rnn))
    sectors, iso = [], []
    N = 0.5 * (curv.rnn + curv.rnn.T)
    trN = np.trace(N)
    N0 = N - trN / m * np.eye(m)
    if np.abs(N0).max(initial=0.0) > atol:
        sectors.append(Sector(N0, "normal_aniso"))
    if abs(trN) > atol:
        iso.append((trN, "normal_trace"))
    Ric = ricci(curv.rbar)
    Ric = 0.5 * (Ric + Ric.T)
    trR = np.trace(Ric)
    R0 = Ric - trR / m * np.eye(m)
    if np.abs(R0).max(initial=0.0) > atol:
        sectors.append(Sector(R0 / 3.0, "tangential_iso"))
    if abs(trR) > atol:
        iso.append((trR, "tangential_trace"))
    for s in sectors:
        s.T.setflags(write=False)
    return SectorDecomposition(n, tuple(sectors), tuple(iso))


__all__ = [
    "CurvatureData", "ValidationReport", "SectorDecomposition", "Sector",
    "validate", "random_admissible", "weyl_norm_sq", "rnn_norm_sq",
    "metric_inverse", "metric_orders", "metric_divergence", "metric_det",
    "mean_curvature_model", "scalar_curvature_model", "rhs_corrector",
    "sector_decompose", "spd_radius", "save_curvature", "load_curvature",
]
