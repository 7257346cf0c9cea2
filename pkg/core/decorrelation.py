"""
Measurement decorrelation through the UD factors of R.

With R = U_r D_r U_rᵀ the transformed measurement z = U_r⁻¹ y has noise
covariance D_r, so the scalar update can process its components one by one.
U_r⁻¹ is never formed; every transform is a unit-diagonal back-substitution.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy.linalg import solve_triangular

from core.config import DEFAULT_TOLERANCES
from core.errors import DimensionError, NotPositiveDefiniteError
from core.factorization import udu_decompose
from core.matrix import DiagonalVector, UnitUpperTriangular, as_matrix

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class DecorrelationTransform:
    """U_r and D_r of a correlated measurement noise covariance."""

    u_r: UnitUpperTriangular
    d_r: DiagonalVector

    @property
    def dim(self) -> int:
        return self.u_r.dim

    def solve(self, b: np.ndarray) -> np.ndarray:
        """U_r⁻¹ b by back-substitution (b may be a vector or a matrix)."""
        b = np.asarray(b, dtype=np.float64)
        if b.shape[0] != self.dim:
            raise DimensionError("operand rows must match the transform size", b.shape, (self.dim,))
        return solve_triangular(self.u_r.to_dense(), b, lower=False, unit_diagonal=True)


class Decorrelated(NamedTuple):
    z: np.ndarray
    h_z: np.ndarray
    d_r: DiagonalVector


def build_decorrelation(r_c, tol: Optional[float] = None) -> DecorrelationTransform:
    """Factor a correlated R as U_r D_r U_rᵀ; every D_r entry must be positive."""
    r_mat = as_matrix(r_c, "R")
    factors = udu_decompose(r_mat)
    if tol is None:
        tol = DEFAULT_TOLERANCES.positive_definite * float(np.max(np.abs(np.diag(r_mat))))
    bad = np.flatnonzero(factors.d.values <= tol)
    if bad.size:
        idx = int(bad[0])
        raise NotPositiveDefiniteError(idx, float(factors.d.values[idx]))
    logger.debug("build_decorrelation: m=%d, D_r=%s", factors.dim, factors.d.values.tolist())
    return DecorrelationTransform(factors.u, factors.d)


def decorrelate(t: DecorrelationTransform, y, h_jac) -> Decorrelated:
    """z = U_r⁻¹ y and H_z = U_r⁻¹ H; the transformed noise covariance is D_r."""
    y = np.asarray(y, dtype=np.float64).ravel()
    h = np.asarray(h_jac, dtype=np.float64)
    if h.ndim != 2 or y.size != t.dim or h.shape[0] != t.dim:
        raise DimensionError("decorrelate: y and H must have m rows", y.shape, h.shape, (t.dim,))
    return Decorrelated(t.solve(y), t.solve(h), t.d_r)
