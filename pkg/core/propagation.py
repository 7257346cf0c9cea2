"""
Time update of the UD factors by weighted modified Gram-Schmidt (WMGS).

The propagated covariance  F P⁺ Fᵀ + G Q Gᵀ  is first written in the
candidate form  W D̂ Wᵀ  with

    W = [ F U⁺ | G ]           (n × (n+q))
    D̂ = diag(D⁺, Q)            (length n+q)

WMGS then orthogonalises the rows of W under the weight D̂, bottom row
first, giving W = Ū V with V D̂ Vᵀ diagonal.  The propagated factors are Ū
and D̄ = diag(V D̂ Vᵀ).

Correlated Q is accepted: it is factored as U_q D_q U_qᵀ and U_q is folded
into G before the candidate form is assembled.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from core.config import DEFAULT_TOLERANCES
from core.errors import DimensionError, NonFiniteError, NotPositiveDefiniteError
from core.factorization import UDFactors, roundoff_floor, udu_decompose
from core.matrix import DiagonalVector, UnitUpperTriangular, is_diagonal

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Data types
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PropagationInputs:
    """F, G, Q and the last posterior factors."""

    f_jac: np.ndarray
    g_map: Optional[np.ndarray]
    q_cov: Optional[np.ndarray]
    prior_factors: UDFactors

    def __post_init__(self) -> None:
        n = self.prior_factors.dim
        f = np.asarray(self.f_jac, dtype=np.float64)
        if f.ndim == 0:
            f = f.reshape(1, 1)
        g = np.zeros((n, 0)) if self.g_map is None else np.asarray(self.g_map, dtype=np.float64)
        q = np.zeros((0, 0)) if self.q_cov is None else np.asarray(self.q_cov, dtype=np.float64)
        if g.ndim == 1:
            g = g.reshape(n, -1)
        if q.ndim < 2:
            q = np.atleast_1d(q)
            q = np.diag(q) if q.size else np.zeros((0, 0))

        if f.shape != (n, n):
            raise DimensionError("F must be n×n for the prior factors", f.shape, (n, n))
        if g.shape[0] != n:
            raise DimensionError("G must have n rows", g.shape, (n,))
        if q.shape != (g.shape[1], g.shape[1]):
            raise DimensionError("Q must be q×q with q = columns of G", q.shape, g.shape)
        for name, arr in (("F", f), ("G", g), ("Q", q)):
            if not np.all(np.isfinite(arr)):
                raise NonFiniteError(f"{name} contains NaN or Inf")
        if q.size and np.any(np.diag(q) < 0.0):
            idx = int(np.flatnonzero(np.diag(q) < 0.0)[0])
            raise NotPositiveDefiniteError(idx, float(q[idx, idx]))

        object.__setattr__(self, "f_jac", f)
        object.__setattr__(self, "g_map", g)
        object.__setattr__(self, "q_cov", q)

    @property
    def n(self) -> int:
        return self.prior_factors.dim

    @property
    def q(self) -> int:
        return int(self.g_map.shape[1])


@dataclass
class DegenerateDirection:
    """A WMGS direction whose weighted norm collapsed while a row still projected onto it."""

    row: int
    direction: int
    norm: float


@dataclass
class WMGSWorkspace:
    """Scratch state of one WMGS run; operation-local."""

    w_rows: np.ndarray
    """Rows of W = [F U⁺ | G], shape n × (n+q)."""

    d_hat: DiagonalVector
    """diag(D⁺, Q), length n+q."""

    v_rows: Optional[np.ndarray] = None
    """Orthogonalised rows v_k, filled by wmgs()."""

    u_out: Optional[UnitUpperTriangular] = None
    """Coefficients u(k,j), filled by wmgs()."""

    degenerate: List[DegenerateDirection] = field(default_factory=list)

    clamped: List[Tuple[int, float]] = field(default_factory=list)
    """(index, value) of round-off negative D-hat entries read as zero."""


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def build_candidate(inputs: PropagationInputs, diag_rtol: Optional[float] = None) -> WMGSWorkspace:
    """Assemble W = [F U⁺ | G] and D̂ = diag(D⁺, Q)."""
    if diag_rtol is None:
        diag_rtol = DEFAULT_TOLERANCES.diagonal

    g = inputs.g_map
    q = inputs.q_cov
    if q.size and not is_diagonal(q, diag_rtol):
        qf = udu_decompose(q)
        g = g @ qf.u.to_dense()
        q_diag = qf.d.values
        logger.debug("build_candidate: correlated Q folded into G")
    else:
        q_diag = np.diag(q)

    fu = inputs.f_jac @ inputs.prior_factors.u.to_dense()
    w = np.hstack([fu, g])
    d_hat = np.concatenate([inputs.prior_factors.d.values, q_diag])
    return WMGSWorkspace(w_rows=w, d_hat=DiagonalVector(d_hat))


def wmgs(workspace: WMGSWorkspace, tol_orth: Optional[float] = None) -> UDFactors:
    """Weighted modified Gram-Schmidt on the rows of W.

    Rows are finalised from the last to the first.  Row k starts as w_k and
    has its projection onto each finalised v_j (j = n-1 … k+1) removed in
    turn, so u(k,j) = v D̂ v_jᵀ / v_j D̂ v_jᵀ is taken against the partly
    orthogonalised row.  Only j > k coefficients exist.

    D̂ entries in [−floor, 0), floor = Tolerances.roundoff × max |D̂|, are read
    as zero and listed in workspace.clamped; anything more negative raises
    NotPositiveDefiniteError.
    """
    w = np.asarray(workspace.w_rows, dtype=np.float64)
    d_hat = workspace.d_hat.values
    if w.ndim != 2 or w.shape[1] != d_hat.size:
        raise DimensionError("W columns must match D-hat length", w.shape, d_hat.shape)
    floor = roundoff_floor(d_hat)
    below = np.flatnonzero(d_hat < -floor)
    if below.size:
        raise NotPositiveDefiniteError(int(below[0]), float(d_hat[below[0]]))
    workspace.clamped = [(int(i), float(d_hat[i])) for i in np.flatnonzero(d_hat < 0.0)]
    if workspace.clamped:
        d_hat = np.maximum(d_hat, 0.0)

    if tol_orth is None:
        tol_orth = DEFAULT_TOLERANCES.orthogonality * float(np.max(d_hat, initial=0.0))

    n = w.shape[0]
    v = np.zeros_like(w)
    u = np.eye(n)
    d_bar = np.zeros(n)
    workspace.degenerate = []

    for k in range(n - 1, -1, -1):
        row = w[k].copy()
        for j in range(n - 1, k, -1):
            projection = float(np.dot(row * d_hat, v[j]))
            if d_bar[j] <= tol_orth:
                if abs(projection) > tol_orth:
                    workspace.degenerate.append(DegenerateDirection(k, j, float(d_bar[j])))
                u[k, j] = 0.0
                continue
            u[k, j] = projection / d_bar[j]
            row -= u[k, j] * v[j]
        v[k] = row
        d_bar[k] = max(float(np.dot(row * row, d_hat)), 0.0)

    for event in workspace.degenerate:
        logger.warning(
            "wmgs: direction %d collapsed (|v|_D^2 = %.3e) while row %d projects onto it",
            event.direction, event.norm, event.row,
        )

    workspace.v_rows = v
    workspace.u_out = UnitUpperTriangular.from_dense(u)
    return UDFactors(workspace.u_out, DiagonalVector(d_bar))


def propagate_factors(inputs: PropagationInputs, tol_orth: Optional[float] = None) -> UDFactors:
    """[Ū, D̄] = WMGS(W, D̂) for the given F, G, Q and posterior factors."""
    return wmgs(build_candidate(inputs), tol_orth)
