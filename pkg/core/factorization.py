"""
UD decomposition  P = U D U^T.

The mechanization walks columns from the last to the first:

    for j = n-1 … 0
        for i = j … 0
            σ = M(i,j) − Σ_{k>j} U(i,k) D(k) U(j,k)
            i == j :  D(j) = σ
            i <  j :  U(i,j) = σ / D(j)

No root is taken anywhere in this module; D carries what a Cholesky factor
would carry as squares.

Positive semi-definite inputs are accepted: a pivot at or below the pivot
floor is allowed when the column above it is also negligible, in which case
that column of U is zero.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Tuple

import numpy as np

from core.config import DEFAULT_TOLERANCES
from core.errors import DimensionError, NotSymmetricError, SingularPivotError
from core.matrix import DiagonalVector, UnitUpperTriangular, as_matrix, reconstruct

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class UDFactors:
    """U (unit upper triangular) and D (diagonal) with P = U D U^T."""

    u: UnitUpperTriangular
    d: DiagonalVector

    def __post_init__(self) -> None:
        if self.u.dim != self.d.dim:
            raise DimensionError("UDFactors: U and D differ in size", (self.u.dim,), (self.d.dim,))

    @property
    def dim(self) -> int:
        return self.u.dim

    @classmethod
    def from_arrays(cls, u: np.ndarray, d: np.ndarray) -> "UDFactors":
        return cls(UnitUpperTriangular.from_dense(u), DiagonalVector(d))

    @classmethod
    def identity(cls, dim: int) -> "UDFactors":
        return cls(UnitUpperTriangular.identity(dim), DiagonalVector(np.ones(dim)))

    def covariance(self) -> np.ndarray:
        return reconstruct(self.u, self.d)

    def __repr__(self) -> str:
        return f"UDFactors(U={self.u.to_dense().tolist()}, D={self.d.values.tolist()})"


class PsdStatus(NamedTuple):
    ok: bool
    first_negative: Optional[int]


def is_psd(f: UDFactors) -> PsdStatus:
    """Sign test on D: healthy iff no entry is negative."""
    idx = f.d.first_negative()
    return PsdStatus(idx is None, idx)


def roundoff_floor(d: np.ndarray, rtol: Optional[float] = None) -> float:
    if rtol is None:
        rtol = DEFAULT_TOLERANCES.roundoff
    return rtol * float(np.max(np.abs(d), initial=0.0))


def clamp_roundoff(f: UDFactors, rtol: Optional[float] = None) -> Tuple[UDFactors, List[Tuple[int, float]]]:
    """Zero the negative D entries that are round-off of a semi-definite P.

    Returns the factors (the same object when nothing changed) and the
    (index, value) of every entry that was zeroed.  Entries below
    −rtol × max |D| are left alone; is_psd still reports them.
    """
    d = f.d.values
    floor = roundoff_floor(d, rtol)
    hits = np.flatnonzero((d < 0.0) & (d >= -floor))
    if not hits.size:
        return f, []
    clamped = [(int(i), float(d[i])) for i in hits]
    d_new = d.copy()
    d_new[hits] = 0.0
    logger.debug("clamp_roundoff: zeroed D%s (floor %.3e)", [i for i, _ in clamped], floor)
    return UDFactors(f.u, DiagonalVector(d_new)), clamped


def udu_decompose(
    m,
    tol: Optional[float] = None,
    tol_pivot: Optional[float] = None,
) -> UDFactors:
    """Factor a symmetric positive (semi-)definite matrix as U D U^T.

    Parameters
    ----------
    m : array_like
        Square symmetric matrix.
    tol : float, optional
        Relative symmetry tolerance (default ``Tolerances.symmetry``).
    tol_pivot : float, optional
        Absolute pivot floor (default ``Tolerances.pivot`` × max diagonal).

    Raises
    ------
    NotSymmetricError
        max |M − Mᵀ| exceeds tol × max |M|.
    SingularPivotError
        A pivot is at or below the floor while the column above it is not.
    """
    mat = as_matrix(m, "udu_decompose input")
    n, cols = mat.shape
    if n != cols:
        raise DimensionError("udu_decompose needs a square matrix", mat.shape)

    if tol is None:
        tol = DEFAULT_TOLERANCES.symmetry
    scale = float(np.max(np.abs(mat)))
    asymmetry = float(np.max(np.abs(mat - mat.T)))
    if asymmetry > tol * scale:
        raise NotSymmetricError(asymmetry, tol * scale)

    if tol_pivot is None:
        tol_pivot = DEFAULT_TOLERANCES.pivot * float(np.max(np.abs(np.diag(mat))))

    u = np.eye(n)
    d = np.zeros(n)
    for j in range(n - 1, -1, -1):
        weights = d[j + 1:] * u[j, j + 1:]
        for i in range(j, -1, -1):
            sigma = mat[i, j] - float(np.dot(u[i, j + 1:], weights))
            if i == j:
                d[j] = sigma
                continue
            if d[j] > tol_pivot:
                u[i, j] = sigma / d[j]
            elif abs(sigma) <= tol_pivot:
                u[i, j] = 0.0
            else:
                raise SingularPivotError(j, float(d[j]), tol_pivot)

    if np.any(d <= tol_pivot):
        logger.debug("udu_decompose: %d pivot(s) at or below %.3e", int(np.sum(d <= tol_pivot)), tol_pivot)
    return UDFactors(UnitUpperTriangular.from_dense(u), DiagonalVector(d))
