"""Quadrature on unit spheres: exact low-degree designs and scrambled Sobol points."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import gammaln
from scipy.stats import qmc, norm


def sphere_area(m: int) -> float:
    """Area of the unit sphere ``S^{m-1}`` in ``R^m``."""
    return float(2.0 * np.exp(0.5 * m * np.log(np.pi) - gammaln(0.5 * m)))


@lru_cache(maxsize=None)
def design5(m: int):
    """Points and weights integrating polynomials of degree <= 5 exactly on ``S^{m-1}``.

    Nodes are ``+-e_i`` and ``(+-e_i +- e_j)/sqrt 2``.  Weights come from
    matching ``1``, ``x_1^4`` and ``x_1^2 x_2^2``; odd moments vanish by
    symmetry.  The axis weight is negative for ``m > 4``, which is harmless for
    exactness.
    """
    S = sphere_area(m)
    b = S / (m * (m + 2))
    a = S * (4 - m) / (2 * m * (m + 2))
    eye = np.eye(m)
    pts = [eye, -eye]
    wts = [np.full(2 * m, a)]
    diag = []
    for i in range(m):
        for j in range(i + 1, m):
            for si in (1, -1):
                for sj in (1, -1):
                    p = np.zeros(m)
                    p[i], p[j] = si, sj
                    diag.append(p / np.sqrt(2.0))
    if diag:
        pts.append(np.array(diag))
        wts.append(np.full(len(diag), b))
    P = np.vstack(pts)
    W = np.concatenate(wts)
    P.setflags(write=False)
    W.setflags(write=False)
    return P, W


def angular_moment_4(T: np.ndarray) -> float:
    """``int_{S^{m-1}} (theta^T T theta)^2`` for symmetric ``T``, closed form."""
    m = T.shape[0]
    return sphere_area(m) * (np.trace(T) ** 2 + 2.0 * np.sum(T * T)) / (m * (m + 2))


def sobol_sphere(npts: int, m: int, seed) -> np.ndarray:
    """Scrambled Sobol points pushed to ``S^{m-1}`` through the Gaussian map."""
    u = qmc.Sobol(d=m, scramble=True, seed=seed).random(npts)
    g = norm.ppf(np.clip(u, 1e-15, 1 - 1e-15))
    return g / np.linalg.norm(g, axis=1, keepdims=True)
