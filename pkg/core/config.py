"""
Tolerances and filter options.

All tolerances are relative; each operation scales them by the magnitude of
its own inputs (see the field notes) and accepts an absolute override.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Tolerances:
    """Relative tolerances used across the library."""

    symmetry: float = 1e-9
    """max |M - M^T| allowed, relative to max |M|."""

    pivot: float = 1e-13
    """Pivot floor for UD decomposition and rank-one updates, × max diagonal."""

    orthogonality: float = 1e-13
    """Degenerate-direction floor for WMGS, × max(D-hat)."""

    alpha: float = 1e-14
    """Innovation-variance floor, × (r + |h|^2 trace P)."""

    diagonal: float = 1e-12
    """Off-diagonal magnitude above which Q or R counts as correlated, × max diagonal."""

    positive_definite: float = 1e-13
    """Decorrelation floor on D_r entries, × max diagonal of R."""

    roundoff: float = 1e-10
    """Negative D entries down to −roundoff × max |D| are round-off on a semi-definite P and read as 0."""


@dataclass(frozen=True)
class FilterOptions:
    """Behaviour switches for the UD filter."""

    relinearize: bool = False
    """Re-evaluate h and H at the running state between scalar updates."""

    enforce_psd: bool = False
    """Clamp negative D entries to zero after each update (the event is still recorded)."""

    tolerances: Tolerances = field(default_factory=Tolerances)


DEFAULT_TOLERANCES = Tolerances()
