"""Least-squares exponent fits on log-log data and a nested test for a log correction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats


@dataclass(frozen=True)
class LinearFit:
    coef: np.ndarray
    stderr: np.ndarray
    rss: float
    dof: int

    @property
    def slope(self) -> float:
        return float(self.coef[1])

    @property
    def intercept(self) -> float:
        return float(self.coef[0])

    def ci(self, index: int = 1, level: float = 0.95):
        half = stats.t.ppf(0.5 + level / 2, self.dof) * self.stderr[index] if self.dof > 0 else np.inf
        return float(self.coef[index] - half), float(self.coef[index] + half)


def ols(X: np.ndarray, y: np.ndarray) -> LinearFit:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    rss = float(resid @ resid)
    dof = len(y) - X.shape[1]
    sigma2 = rss / dof if dof > 0 else np.nan
    cov = sigma2 * np.linalg.pinv(X.T @ X)
    return LinearFit(coef, np.sqrt(np.abs(np.diag(cov))), rss, dof)


def loglog_fit(x, y) -> LinearFit:
    """``log y = a + b log x``; ``slope`` is ``b``."""
    lx = np.log(np.asarray(x, dtype=float))
    X = np.column_stack([np.ones_like(lx), lx])
    return ols(X, np.log(np.asarray(y, dtype=float)))


@dataclass(frozen=True)
class NestedComparison:
    base: LinearFit
    extended: LinearFit
    f_stat: float
    p_value: float

    @property
    def corrected_slope(self) -> float:
        return float(self.extended.coef[1])

    @property
    def log_power(self) -> float:
        return float(self.extended.coef[2])

    def significant(self, alpha: float = 0.01) -> bool:
        return self.p_value < alpha


def log_correction_test(x, y) -> NestedComparison:
    """Compare ``log y = a + b log x`` with ``+ c log|log x|`` by an F-test."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    X0 = np.column_stack([np.ones_like(lx), lx])
    X1 = np.column_stack([X0, np.log(np.abs(lx))])
    base, ext = ols(X0, ly), ols(X1, ly)
    if ext.dof <= 0:
        raise ValueError("not enough points for the nested comparison")
    if ext.rss <= 0:
        return NestedComparison(base, ext, np.inf, 0.0)
    F = (base.rss - ext.rss) / (ext.rss / ext.dof)
    return NestedComparison(base, ext, float(F), float(stats.f.sf(F, 1, ext.dof)))
