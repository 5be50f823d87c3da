"""Standard half-space bubble, its rescaled family and the linearized kernel.

Points of the half-space are stored as arrays whose last axis holds
``(z_1, ..., z_{n-1}, t)``; ``t >= 0`` is the normal coordinate.  Every
derivative below is a hand-derived closed form so that residual checks see
formula errors only, never discretization error.

With ``D = (1 + t)^2 + |z|^2`` the bubble is ``U = D^{-(n-2)/2}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class DomainError(ValueError):
    """A point or parameter lies outside the admissible domain."""


@dataclass(frozen=True)
class HalfSpacePoint:
    z: np.ndarray
    t: float
    _arr: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        z = np.atleast_1d(np.asarray(self.z, dtype=float))
        if z.ndim != 1:
            raise DomainError("z must be a vector of tangential coordinates")
        if not np.isfinite(self.t) or not np.all(np.isfinite(z)):
            raise DomainError("non-finite coordinate")
        if self.t < 0:
            raise DomainError(f"normal coordinate t={self.t} is negative")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "_arr", np.append(z, float(self.t)))

    @property
    def dim(self) -> int:
        return self._arr.size

    def __array__(self, dtype=None, copy=None):
        return self._arr if dtype is None else self._arr.astype(dtype)


def check_dimension(n, minimum: int = 3) -> int:
    if int(n) != n or n < minimum:
        raise DomainError(f"dimension n={n} must be an integer >= {minimum}")
    return int(n)


def as_points(y, n: int) -> np.ndarray:
    """Validate ``y`` as a batch of half-space points in dimension ``n``."""
    n = check_dimension(n)
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != n:
        raise DomainError(f"points have {y.shape[-1]} coordinates, expected n={n}")
    if np.any(y[..., -1] < 0):
        raise DomainError("normal coordinate t must be >= 0")
    if not np.all(np.isfinite(y)):
        raise DomainError("non-finite coordinate")
    return y


def _split(y):
    z = y[..., :-1]
    t = y[..., -1]
    return z, t, np.sum(z * z, axis=-1)


def _denominator(y):
    z, t, r2 = _split(y)
    return (1.0 + t) ** 2 + r2


def bubble(y, n: int) -> np.ndarray:
    y = as_points(y, n)
    return _denominator(y) ** (-(n - 2) / 2.0)


def bubble_family(y, delta: float, n: int) -> np.ndarray:
    """``U_delta(y) = delta^{-(n-2)/2} U(y / delta)``."""
    if not delta > 0:
        raise DomainError(f"delta={delta} must be positive")
    y = as_points(y, n)
    return delta ** (-(n - 2) / 2.0) * bubble(y / delta, n)


def bubble_gradient(y, n: int) -> np.ndarray:
    y = as_points(y, n)
    D = _denominator(y)
    shifted = y.copy()
    shifted[..., -1] += 1.0
    return -(n - 2) * shifted * D[..., None] ** (-n / 2.0)


def bubble_hessian(y, n: int) -> np.ndarray:
    """Full ``n x n`` Hessian of ``U``.

    ``d_ij U = -(n-2) D^{-n/2} delta_ij + n(n-2) D^{-(n+2)/2} Y_i Y_j`` with
    ``Y = y + e_n``.
    """
    y = as_points(y, n)
    D = _denominator(y)
    Y = y.copy()
    Y[..., -1] += 1.0
    iso = -(n - 2) * D ** (-n / 2.0)
    aniso = n * (n - 2) * D ** (-(n + 2) / 2.0)
    return iso[..., None, None] * np.eye(n) + aniso[..., None, None] * Y[..., :, None] * Y[..., None, :]


def bubble_laplacian(y, n: int) -> np.ndarray:
    return np.trace(bubble_hessian(y, n), axis1=-2, axis2=-1)


def _check_index(b: int, n: int) -> int:
    if int(b) != b or not 1 <= b <= n:
        raise IndexError(f"kernel index b={b} outside 1..{n}")
    return int(b)


def kernel(b: int, y, n: int) -> np.ndarray:
    """Kernel element ``j_b`` of the linearized problem (``b`` is 1-based).

    ``j_b = dU/dz_b`` for ``b < n`` and ``j_n = (n-2)/2 U + y . grad U``, which
    simplifies to ``(n-2)/2 D^{-n/2} (1 - t^2 - |z|^2)``.
    """
    b = _check_index(b, n)
    y = as_points(y, n)
    z, t, r2 = _split(y)
    D = (1.0 + t) ** 2 + r2
    if b < n:
        return -(n - 2) * z[..., b - 1] * D ** (-n / 2.0)
    return 0.5 * (n - 2) * D ** (-n / 2.0) * (1.0 - t * t - r2)


def kernel_gradient(b: int, y, n: int) -> np.ndarray:
    b = _check_index(b, n)
    y = as_points(y, n)
    z, t, r2 = _split(y)
    D = (1.0 + t) ** 2 + r2
    Dn = D ** (-n / 2.0)
    Dn2 = D ** (-(n + 2) / 2.0)
    out = np.empty(y.shape)
    if b < n:
        zb = z[..., b - 1]
        out[..., :-1] = n * (n - 2) * z * (zb * Dn2)[..., None]
        out[..., b - 1] -= (n - 2) * Dn
        out[..., -1] = n * (n - 2) * zb * (1.0 + t) * Dn2
        return out
    c = 0.5 * (n - 2)
    s = 1.0 - t * t - r2
    out[..., :-1] = c * z * (-n * Dn2 * s - 2.0 * Dn)[..., None]
    out[..., -1] = c * (-n * (1.0 + t) * Dn2 * s - 2.0 * t * Dn)
    return out


def residuals(y, n: int):
    """Closed-form residuals of the bubble problem and its linearization.

    Returns ``(interior, boundary, linearized)``: ``-Laplacian U`` at ``y``;
    ``dU/dt + (n-2) U^{n/(n-2)}`` and ``dj_b/dt + n U^{2/(n-2)} j_b`` at the
    boundary projection ``(z, 0)``.  ``linearized`` has a trailing axis of
    length ``n``.
    """
    y = as_points(y, n)
    interior = -bubble_laplacian(y, n)
    yb = y.copy()
    yb[..., -1] = 0.0
    U = bubble(yb, n)
    boundary = bubble_gradient(yb, n)[..., -1] + (n - 2) * U ** (n / (n - 2))
    lin = np.stack(
        [kernel_gradient(b, yb, n)[..., -1] + n * U ** (2.0 / (n - 2)) * kernel(b, yb, n)
         for b in range(1, n + 1)],
        axis=-1,
    )
    return interior, boundary, lin


def residual_scales(y, n: int):
    """Magnitudes that the residuals of :func:`residuals` are relative to."""
    y = as_points(y, n)
    H = bubble_hessian(y, n)
    interior = np.sqrt(np.sum(H * H, axis=(-2, -1)))
    yb = y.copy()
    yb[..., -1] = 0.0
    U = bubble(yb, n)
    boundary = (n - 2) * U ** (n / (n - 2))
    lin = np.stack(
        [np.abs(kernel_gradient(b, yb, n)[..., -1]) + n * U ** (2.0 / (n - 2)) * np.abs(kernel(b, yb, n))
         for b in range(1, n + 1)],
        axis=-1,
    )
    return interior, boundary, lin


def finite_difference_gradient(fun, y, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar field, for cross-checking.

    Near ``t = 0`` the normal direction uses a one-sided second-order stencil
    so that no point leaves the half-space.
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    out = np.empty(y.shape)
    for k in range(y.shape[-1]):
        e = np.zeros(y.shape[-1])
        e[k] = h
        if k == y.shape[-1] - 1:
            inside = y[:, -1] >= h
            col = np.empty(len(y))
            yi, yo = y[inside], y[~inside]
            col[inside] = (fun(yi + e) - fun(yi - e)) / (2 * h)
            col[~inside] = (-3 * fun(yo) + 4 * fun(yo + e) - fun(yo + 2 * e)) / (2 * h)
            out[:, k] = col
        else:
            out[:, k] = (fun(y + e) - fun(y - e)) / (2 * h)
    return out


def decay_exponents(n: int, radii=(16.0, 32.0, 64.0, 128.0), directions: int = 64, seed: int = 0) -> dict:
    """Log-log slopes of sphere suprema of ``|U|``, ``|grad U|``, ``|Hess U|`` over ``radii``."""
    n = check_dimension(n)
    g = np.random.default_rng(seed).standard_normal((directions, n))
    g[:, -1] = np.abs(g[:, -1])
    g = np.vstack([g, np.eye(n)])
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    sups = {0: [], 1: [], 2: []}
    for r in radii:
        y = r * g
        sups[0].append(np.abs(bubble(y, n)).max())
        sups[1].append(np.linalg.norm(bubble_gradient(y, n), axis=-1).max())
        sups[2].append(np.linalg.norm(bubble_hessian(y, n), axis=(-2, -1)).max())
    lr = np.log(np.asarray(radii))
    return {tau: float(np.polyfit(lr, np.log(s), 1)[0]) for tau, s in sups.items()}
