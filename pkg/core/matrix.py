"""
Dense matrix substrate for the UD filter.

Matrices are plain float64 ``numpy.ndarray`` values.  Two small value types
carry the factors:

  UnitUpperTriangular – packed strict-upper entries; the unit diagonal and
                        the zero lower triangle are implicit, so they cannot
                        be stored wrong.
  DiagonalVector      – the diagonal of D (never its square root).

Both hold read-only arrays and are safe to share between threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from core.errors import DimensionError, NonFiniteError


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def _frozen(values: np.ndarray) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True)
    arr.flags.writeable = False
    return arr


def as_matrix(values, name: str = "matrix") -> np.ndarray:
    """Validate user input as a finite, non-empty 2-D float64 array (read-only copy)."""
    arr = np.array(values, dtype=np.float64, copy=True)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"{name} must be a non-empty 2-D matrix", arr.shape)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{name} contains NaN or Inf")
    arr.flags.writeable = False
    return arr


def as_vector(values, name: str = "vector") -> np.ndarray:
    """Validate user input as a finite 1-D float64 array (read-only copy)."""
    arr = np.atleast_1d(np.array(values, dtype=np.float64, copy=True))
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be 1-D", arr.shape)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{name} contains NaN or Inf")
    arr.flags.writeable = False
    return arr


def is_diagonal(m: np.ndarray, rtol: float = 1e-12) -> bool:
    """True when every off-diagonal entry is within rtol × max |diagonal|."""
    m = np.asarray(m, dtype=np.float64)
    if m.size == 0:
        return True
    scale = float(np.max(np.abs(np.diag(m)))) if m.shape[0] else 0.0
    off = m - np.diag(np.diag(m))
    return bool(np.max(np.abs(off)) <= rtol * scale) if scale > 0.0 else not np.any(off)


# ---------------------------------------------------------------------------
# Value types
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class UnitUpperTriangular:
    """Unit upper-triangular matrix stored as its strict upper entries (row-major)."""

    dim: int
    packed: np.ndarray

    def __post_init__(self) -> None:
        expected = self.dim * (self.dim - 1) // 2
        if self.dim < 1:
            raise DimensionError("UnitUpperTriangular needs dim >= 1", (self.dim,))
        packed = np.asarray(self.packed, dtype=np.float64).ravel()
        if packed.size != expected:
            raise DimensionError(
                f"expected {expected} strict-upper entries for dim {self.dim}", packed.shape
            )
        if not np.all(np.isfinite(packed)):
            raise NonFiniteError("UnitUpperTriangular entries contain NaN or Inf")
        object.__setattr__(self, "packed", _frozen(packed))

    # -- construction ---------------------------------------------------------

    @classmethod
    def identity(cls, dim: int) -> "UnitUpperTriangular":
        return cls(dim, np.zeros(dim * (dim - 1) // 2))

    @classmethod
    def from_dense(cls, a: np.ndarray) -> "UnitUpperTriangular":
        """Take the strict upper triangle of a square array; diagonal and lower part are ignored."""
        a = np.asarray(a, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionError("unit upper-triangular source must be square", a.shape)
        n = a.shape[0]
        return cls(n, a[np.triu_indices(n, 1)])

    # -- access ---------------------------------------------------------------

    def to_dense(self) -> np.ndarray:
        """Return a fresh writable n×n array with ones on the diagonal."""
        out = np.eye(self.dim)
        out[np.triu_indices(self.dim, 1)] = self.packed
        return out

    def __getitem__(self, idx: tuple[int, int]) -> float:
        i, j = idx
        if not (0 <= i < self.dim and 0 <= j < self.dim):
            raise IndexError(f"index {idx} out of range for dim {self.dim}")
        if i == j:
            return 1.0
        if i > j:
            return 0.0
        # row-major offset of (i, j) inside the strict upper triangle
        k = i * self.dim - i * (i + 1) // 2 + (j - i - 1)
        return float(self.packed[k])

    def __repr__(self) -> str:
        return f"UnitUpperTriangular(dim={self.dim}, dense={self.to_dense().tolist()})"


@dataclass(frozen=True, eq=False)
class DiagonalVector:
    """The diagonal entries of D."""

    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.atleast_1d(np.asarray(self.values, dtype=np.float64))
        if vals.ndim != 1 or vals.size < 1:
            raise DimensionError("DiagonalVector must be a non-empty 1-D array", vals.shape)
        if not np.all(np.isfinite(vals)):
            raise NonFiniteError("DiagonalVector entries contain NaN or Inf")
        object.__setattr__(self, "values", _frozen(vals))

    @property
    def dim(self) -> int:
        return int(self.values.size)

    def first_negative(self) -> Optional[int]:
        """Index of the first strictly negative entry, or None."""
        neg = np.flatnonzero(self.values < 0.0)
        return int(neg[0]) if neg.size else None

    def as_matrix(self) -> np.ndarray:
        return np.diag(self.values)

    def __repr__(self) -> str:
        return f"DiagonalVector({self.values.tolist()})"


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def mat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with a shape check that names both operands."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError("mat_mul: inner dimensions differ", a.shape, b.shape)
    return a @ b


def reconstruct(u: UnitUpperTriangular, d: DiagonalVector) -> np.ndarray:
    """Return U D U^T, exactly symmetric (upper triangle computed, then mirrored)."""
    if u.dim != d.dim:
        raise DimensionError("reconstruct: U and D differ in size", (u.dim,), (d.dim,))
    ud = u.to_dense()
    p = (ud * d.values) @ ud.T
    upper = np.triu(p)
    return upper + np.triu(p, 1).T


def cholesky_factor(u: UnitUpperTriangular, d: DiagonalVector) -> np.ndarray:
    """Square-root factor S = U sqrt(D), so that S S^T = U D U^T."""
    if u.dim != d.dim:
        raise DimensionError("cholesky_factor: U and D differ in size", (u.dim,), (d.dim,))
    idx = d.first_negative()
    if idx is not None:
        raise NonFiniteError(f"D[{idx}] = {d.values[idx]:.3e} has no real square root")
    return u.to_dense() * np.sqrt(d.values)
