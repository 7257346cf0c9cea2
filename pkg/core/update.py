"""
Scalar measurement updates of the UD factors.

modified_agee_turner  – the filter's update path: one scalar measurement,
                        returns U⁺, D⁺ and the gain K without forming P.
direct_ud_update      – reference path: UD-decompose D̄ − D̄ w a wᵀ D̄ and
                        multiply, U⁺ = Ū 𝒰, D⁺ = 𝒟.
standard_agee_turner  – rank-one update U D Uᵀ + c a aᵀ (c ≥ 0); a library
                        primitive, not used by the filter.

For a row h and noise variance r the scalar recursion is

    w = Ūᵀ hᵀ,  v_j = d̄_j w_j
    α_1 = r + v_1 w_1,           d_1 = r d̄_1 / α_1,     K_1 = [v_1 0 … 0]ᵀ
    α_j = α_{j−1} + v_j w_j,     d_j = d̄_j α_{j−1} / α_j
    λ_j = −w_j / α_{j−1},        U⁺_j = Ū_j + λ_j K_{j−1},   K_j = K_{j−1} + v_j Ū_j
    K = K_n / α_n

(columns indexed by j; α_n = h P̄ hᵀ + r is the innovation variance).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from core.config import DEFAULT_TOLERANCES
from core.errors import (
    DimensionError,
    NegativePriorDError,
    NonFiniteError,
    ZeroInnovationVarianceError,
    ZeroPivotError,
)
from core.factorization import UDFactors, roundoff_floor, udu_decompose
from core.matrix import DiagonalVector, UnitUpperTriangular, as_vector


# ---------------------------------------------------------------------------
# Data types
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ScalarMeasurement:
    """One row of the measurement model and its measured / predicted values."""

    h_row: np.ndarray
    r_scalar: float
    value: float
    predicted: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "h_row", as_vector(self.h_row, "h_row"))
        for name in ("r_scalar", "value", "predicted"):
            val = float(getattr(self, name))
            if not np.isfinite(val):
                raise NonFiniteError(f"{name} is not finite")
            object.__setattr__(self, name, val)
        if self.r_scalar < 0.0:
            raise ValueError(f"r_scalar = {self.r_scalar:.3e} must be non-negative")

    @property
    def innovation(self) -> float:
        return self.value - self.predicted


@dataclass(frozen=True, eq=False)
class AgeeTurnerScratch:
    """Intermediate quantities of one modified Agee-Turner pass."""

    w: np.ndarray
    v: np.ndarray
    alpha: np.ndarray
    lam: np.ndarray
    k_partial: np.ndarray
    """K_n before normalisation by α_n."""


@dataclass(frozen=True, eq=False)
class ScalarUpdateResult:
    """Posterior factors, gain and innovation statistics of one scalar update."""

    factors: UDFactors
    gain: np.ndarray
    innovation: float
    innovation_variance: float
    scratch: Optional[AgeeTurnerScratch] = None


@dataclass(frozen=True, eq=False)
class RankOneInputs:
    """Factors plus the rank-one term c a aᵀ."""

    factors: UDFactors
    c: float
    a: np.ndarray

    def __post_init__(self) -> None:
        a = as_vector(self.a, "a")
        if a.size != self.factors.dim:
            raise DimensionError("a must match the factor dimension", a.shape, (self.factors.dim,))
        c = float(self.c)
        if not np.isfinite(c):
            raise NonFiniteError("c is not finite")
        if c < 0.0:
            raise ValueError(f"c = {c!r} must be non-negative")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "c", c)


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def _check_prior(prior: UDFactors, meas: ScalarMeasurement) -> np.ndarray:
    """Prior D with round-off negatives read as zero."""
    if meas.h_row.size != prior.dim:
        raise DimensionError("h_row must match the state dimension", meas.h_row.shape, (prior.dim,))
    d = prior.d.values
    below = np.flatnonzero(d < -roundoff_floor(d))
    if below.size:
        raise NegativePriorDError(int(below[0]), float(d[below[0]]))
    return np.maximum(d, 0.0)


def _alpha_floor(u: np.ndarray, d: np.ndarray, h: np.ndarray, r: float) -> float:
    trace_p = float(np.sum(u * u * d))
    return DEFAULT_TOLERANCES.alpha * (r + float(np.dot(h, h)) * trace_p)


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def modified_agee_turner(
    prior: UDFactors,
    meas: ScalarMeasurement,
    tol_alpha: Optional[float] = None,
) -> ScalarUpdateResult:
    """Sequential scalar UD measurement update (modified Agee-Turner).

    Raises
    ------
    NegativePriorDError
        A prior D entry is negative beyond round-off (entries within
        Tolerances.roundoff × max |D| of zero are read as zero).
    ZeroInnovationVarianceError
        α_n is at or below the floor (r = 0 and h in the null space of P̄).
    """
    d_bar = _check_prior(prior, meas)
    u_bar = prior.u.to_dense()
    h = meas.h_row
    r = meas.r_scalar
    n = prior.dim
    if tol_alpha is None:
        tol_alpha = _alpha_floor(u_bar, d_bar, h, r)

    w = u_bar.T @ h
    v = d_bar * w
    alpha = np.empty(n)
    lam = np.zeros(n)
    d_plus = np.empty(n)
    u_plus = u_bar.copy()
    k = np.zeros(n)

    k[0] = v[0]
    alpha[0] = r + v[0] * w[0]
    # α_1 = 0 only when r = 0 and w_1 = 0: the measurement says nothing about this direction yet
    d_plus[0] = r * d_bar[0] / alpha[0] if alpha[0] > 0.0 else d_bar[0]

    for j in range(1, n):
        alpha[j] = alpha[j - 1] + v[j] * w[j]
        d_plus[j] = d_bar[j] * alpha[j - 1] / alpha[j] if alpha[j] > 0.0 else d_bar[j]
        # K_{j-1} is zero whenever α_{j-1} is
        lam[j] = -w[j] / alpha[j - 1] if alpha[j - 1] > 0.0 else 0.0
        u_plus[:, j] = u_bar[:, j] + lam[j] * k
        k = k + v[j] * u_bar[:, j]

    alpha_n = float(alpha[-1])
    if alpha_n <= tol_alpha:
        raise ZeroInnovationVarianceError(alpha_n, tol_alpha)

    scratch = AgeeTurnerScratch(w=w, v=v, alpha=alpha, lam=lam, k_partial=k.copy())
    return ScalarUpdateResult(
        factors=UDFactors(UnitUpperTriangular.from_dense(u_plus), DiagonalVector(d_plus)),
        gain=k / alpha_n,
        innovation=meas.innovation,
        innovation_variance=alpha_n,
        scratch=scratch,
    )


def direct_ud_update(
    prior: UDFactors,
    meas: ScalarMeasurement,
    tol_alpha: Optional[float] = None,
) -> ScalarUpdateResult:
    """Scalar update by UD-decomposing the bracketed term.

    P⁺ = Ū [D̄ − D̄ w a wᵀ D̄] Ūᵀ with w = Ūᵀ hᵀ and a = 1 / (h P̄ hᵀ + r);
    the bracket is factored as 𝒰 𝒟 𝒰ᵀ, giving U⁺ = Ū 𝒰 and D⁺ = 𝒟.
    """
    d_bar = _check_prior(prior, meas)
    u_bar = prior.u.to_dense()
    h = meas.h_row
    r = meas.r_scalar
    if tol_alpha is None:
        tol_alpha = _alpha_floor(u_bar, d_bar, h, r)

    w = u_bar.T @ h
    dw = d_bar * w
    alpha = r + float(np.dot(dw, w))
    if alpha <= tol_alpha:
        raise ZeroInnovationVarianceError(alpha, tol_alpha)

    bracket = np.diag(d_bar) - np.outer(dw, dw) / alpha
    inner = udu_decompose(bracket)
    u_plus = u_bar @ inner.u.to_dense()
    return ScalarUpdateResult(
        factors=UDFactors(UnitUpperTriangular.from_dense(u_plus), inner.d),
        gain=(u_bar @ dw) / alpha,
        innovation=meas.innovation,
        innovation_variance=alpha,
    )


def standard_agee_turner(inputs: RankOneInputs, tol_pivot: Optional[float] = None) -> UDFactors:
    """Rank-one update: U⁺ D⁺ U⁺ᵀ = U D Uᵀ + c a aᵀ.

    Columns run from the last to the second, with the running scalar C_j and
    the in-place reduction a_k ← a_k − a_j U(k,j); the first diagonal entry
    is finished after the loop.  c = 0 returns the input factors unchanged.
    """
    u = inputs.factors.u.to_dense()
    d = inputs.factors.d.values
    a = np.array(inputs.a, dtype=np.float64)
    n = inputs.factors.dim
    if tol_pivot is None:
        tol_pivot = DEFAULT_TOLERANCES.pivot * float(np.max(np.abs(d), initial=0.0))

    u_plus = u.copy()
    d_plus = d.copy()
    c = inputs.c
    for j in range(n - 1, 0, -1):
        d_plus[j] = d[j] + c * a[j] * a[j]
        a[:j] -= a[j] * u[:j, j]
        coeff = c * a[j]
        if d_plus[j] <= tol_pivot:
            if coeff != 0.0:
                raise ZeroPivotError(j, float(d_plus[j]))
            # nothing is added in this column; C carries over unchanged
            continue
        u_plus[:j, j] = u[:j, j] + coeff * a[:j] / d_plus[j]
        c = c * d[j] / d_plus[j]
    d_plus[0] = d[0] + c * a[0] * a[0]

    return UDFactors(UnitUpperTriangular.from_dense(u_plus), DiagonalVector(d_plus))
