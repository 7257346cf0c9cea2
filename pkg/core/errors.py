"""
Exception hierarchy for the UD filter library.

Every numerical failure raised by ``core`` derives from ``UDFilterError`` so
callers (the CLI in particular) can map the whole family onto one exit code.
Shape and finiteness problems additionally derive from ``ValueError``.
"""

from __future__ import annotations


class UDFilterError(Exception):
    """Root of all numerical failures raised by the filter library."""


class DimensionError(UDFilterError, ValueError):
    """Operands do not conform."""

    def __init__(self, message: str, *shapes: tuple[int, ...]) -> None:
        if shapes:
            message = f"{message} (shapes: {', '.join(str(s) for s in shapes)})"
        super().__init__(message)
        self.shapes = shapes


class NonFiniteError(UDFilterError, ValueError):
    """An input contains NaN or Inf."""


class NotSymmetricError(UDFilterError):
    """Matrix asymmetry exceeds the relative tolerance."""

    def __init__(self, asymmetry: float, limit: float) -> None:
        super().__init__(
            f"matrix is not symmetric: max |M - M^T| = {asymmetry:.3e} > {limit:.3e}"
        )
        self.asymmetry = asymmetry
        self.limit = limit


class SingularPivotError(UDFilterError):
    """A pivot D(j,j) is too small to divide by while its column is not zero."""

    def __init__(self, index: int, pivot: float, limit: float) -> None:
        super().__init__(
            f"singular pivot at column {index}: D = {pivot:.3e} <= {limit:.3e} "
            "with a non-zero column above it (matrix not positive definite)"
        )
        self.index = index
        self.pivot = pivot


class ZeroPivotError(UDFilterError):
    """Rank-one update produced an updated D entry that must be divided by but is ~0."""

    def __init__(self, index: int, pivot: float) -> None:
        super().__init__(f"zero pivot in rank-one update at column {index}: D+ = {pivot:.3e}")
        self.index = index
        self.pivot = pivot


class NegativePriorDError(UDFilterError):
    """The prior factors handed to a measurement update are not PSD."""

    def __init__(self, index: int, value: float) -> None:
        super().__init__(f"prior D[{index}] = {value:.3e} is negative")
        self.index = index
        self.value = value


class ZeroInnovationVarianceError(UDFilterError):
    """The scalar innovation variance vanished (r = 0 and H in the null space of P)."""

    def __init__(self, alpha: float, limit: float) -> None:
        super().__init__(f"innovation variance {alpha:.3e} <= {limit:.3e}; update is ill-posed")
        self.alpha = alpha


class NotPositiveDefiniteError(UDFilterError):
    """A matrix that must be strictly positive definite is not."""

    def __init__(self, index: int, value: float) -> None:
        super().__init__(f"not positive definite: D[{index}] = {value:.3e}")
        self.index = index
        self.value = value


class InnovationNotFiniteError(UDFilterError):
    """An innovation, its variance, or the updated state became NaN/Inf."""

    def __init__(self, epoch: int, index: int) -> None:
        super().__init__(f"non-finite innovation at epoch {epoch}, measurement {index}")
        self.epoch = epoch
        self.index = index
