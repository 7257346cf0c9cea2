"""
UD extended Kalman filter.

Per epoch:

    propagation   x̂⁻ = f(x̂⁺, u);  [Ū, D̄] = WMGS([F U⁺ | G], diag(D⁺, Q))
    update        for each scalar component i of y (decorrelated if R is not diagonal):
                      [U⁺, D⁺, K] = modified Agee-Turner(Ū, D̄, r_i, H_i)
                      x̂ ← x̂ + K (ỹ_i − ŷ_i)

H and h(x̂⁻) are evaluated once per epoch; the i-th predicted value is
corrected linearly for the state change made by the earlier components
(ŷ_i = h_i(x̂⁻) + H_i (x̂ − x̂⁻)).  FilterOptions.relinearize switches to
re-evaluating h and H at the running state instead.

Positive semi-definiteness is watched through the signs of D after every
propagation and update.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Tuple

import numpy as np

from core.config import FilterOptions
from core.decorrelation import DecorrelationTransform, build_decorrelation
from core.errors import (
    DimensionError,
    InnovationNotFiniteError,
    NonFiniteError,
    UDFilterError,
)
from core.factorization import UDFactors, clamp_roundoff, is_psd, udu_decompose
from core.matrix import DiagonalVector, as_matrix, as_vector, is_diagonal
from core.models import MeasurementModelSet, ProcessModel
from core.propagation import DegenerateDirection, PropagationInputs, build_candidate, wmgs
from core.update import ScalarMeasurement, modified_agee_turner

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Estimates and diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class StateEstimate:
    """State mean with its UD covariance factors at one epoch."""

    x_hat: np.ndarray
    factors: UDFactors
    epoch: int = 0

    def __post_init__(self) -> None:
        x = as_vector(self.x_hat, "x_hat")
        if x.size != self.factors.dim:
            raise DimensionError("state and factors differ in size", x.shape, (self.factors.dim,))
        object.__setattr__(self, "x_hat", x)

    @property
    def covariance(self) -> np.ndarray:
        return self.factors.covariance()

    @property
    def d(self) -> np.ndarray:
        return self.factors.d.values


@dataclass
class NegativeDEvent:
    epoch: int
    index: int
    value: float


@dataclass
class InnovationRecord:
    epoch: int
    index: int
    innovation: float
    variance: float

    @property
    def normalized(self) -> float:
        return self.innovation / float(np.sqrt(self.variance)) if self.variance > 0.0 else float("inf")


@dataclass
class FilterDiagnostics:
    """Append-only record of a filter run."""

    psd_flags: List[Tuple[int, bool]] = field(default_factory=list)
    negative_d_events: List[NegativeDEvent] = field(default_factory=list)
    innovations: List[InnovationRecord] = field(default_factory=list)
    degenerate_events: List[Tuple[int, DegenerateDirection]] = field(default_factory=list)

    def extend(self, other: "FilterDiagnostics") -> None:
        self.psd_flags.extend(other.psd_flags)
        self.negative_d_events.extend(other.negative_d_events)
        self.innovations.extend(other.innovations)
        self.degenerate_events.extend(other.degenerate_events)

    def innovations_at(self, epoch: int) -> List[InnovationRecord]:
        return [rec for rec in self.innovations if rec.epoch == epoch]


@dataclass
class FilterRun:
    """Trajectory (initial estimate first) and diagnostics; failure set when the run halted."""

    trajectory: list
    diagnostics: FilterDiagnostics
    failure: Optional[UDFilterError] = None

    @property
    def halted_epoch(self) -> Optional[int]:
        if self.failure is None:
            return None
        return self.trajectory[-1].epoch + 1


Step = Tuple[Optional[np.ndarray], Optional[np.ndarray]]


# ---------------------------------------------------------------------------
# Filter
# ---------------------------------------------------------------------------

class UDFilter:
    """Table-driven UD EKF: udu initialisation, WMGS propagation, scalar updates."""

    def __init__(self, options: Optional[FilterOptions] = None) -> None:
        self.options = options or FilterOptions()
        self._decorrelation_key: Optional[bytes] = None
        self._decorrelation: Optional[DecorrelationTransform] = None

    # ── Initialise ────────────────────────────────────────────────────────────

    def initialize(self, x0, p0, diagnostics: Optional[FilterDiagnostics] = None) -> StateEstimate:
        """x̂₀ = x0 and [U₀, D₀] = udu(P₀).

        A semi-definite P₀ can leave D entries a few ulps below zero; those
        within the round-off floor are zeroed and recorded as negative-D
        events at epoch 0.
        """
        tol = self.options.tolerances
        p0 = as_matrix(p0, "P0")
        factors, clamped = clamp_roundoff(udu_decompose(p0, tol=tol.symmetry), tol.roundoff)
        self._record_clamped(clamped, 0, diagnostics)
        x0 = as_vector(x0, "x0")
        if x0.size != factors.dim:
            raise DimensionError("x0 and P0 differ in size", x0.shape, p0.shape)
        est = StateEstimate(x0, factors, 0)
        status = is_psd(factors)
        if not status.ok:
            logger.warning("initial D[%d] = %.3e is negative", status.first_negative,
                           factors.d.values[status.first_negative])
        return est

    # ── Propagation ───────────────────────────────────────────────────────────

    def time_update(
        self,
        est: StateEstimate,
        model: ProcessModel,
        u=None,
        diagnostics: Optional[FilterDiagnostics] = None,
    ) -> StateEstimate:
        """x̂⁻ = f(x̂⁺, u); factors by WMGS with F, G taken at x̂⁺."""
        tol = self.options.tolerances
        u_vec = np.zeros(0) if u is None else np.atleast_1d(np.asarray(u, dtype=np.float64))
        x = est.x_hat
        f_jac = model.jacobian_f(x, u_vec)
        g_map = model.jacobian_g(x, u_vec)
        x_next = np.asarray(model.propagate_state(x, u_vec), dtype=np.float64)
        if not np.all(np.isfinite(x_next)):
            raise NonFiniteError(f"propagated state is not finite at epoch {est.epoch + 1}")

        workspace = build_candidate(PropagationInputs(f_jac, g_map, model.q_cov, est.factors), tol.diagonal)
        d_hat_max = float(np.max(workspace.d_hat.values, initial=0.0))
        factors = wmgs(workspace, tol.orthogonality * d_hat_max)

        epoch = est.epoch + 1
        sink = diagnostics if diagnostics is not None else FilterDiagnostics()
        self._record_clamped([c for c in workspace.clamped if c[0] < est.factors.dim], epoch, sink)
        sink.degenerate_events.extend((epoch, event) for event in workspace.degenerate)
        factors = self._monitor(factors, epoch, sink)
        if diagnostics is None and (sink.degenerate_events or sink.negative_d_events):
            logger.warning("epoch %d: %d degenerate / %d negative-D event(s) not kept; "
                           "pass diagnostics to record them", epoch,
                           len(sink.degenerate_events), len(sink.negative_d_events))
        return StateEstimate(x_next, factors, epoch)

    # ── Update ────────────────────────────────────────────────────────────────

    def measurement_update(
        self,
        est: StateEstimate,
        models: MeasurementModelSet,
        y,
    ) -> Tuple[StateEstimate, FilterDiagnostics]:
        """Process the m components of y one scalar at a time."""
        delta = FilterDiagnostics()
        tol = self.options.tolerances
        y = as_vector(y, "y")
        m = y.size
        n = est.factors.dim
        r_cov = np.asarray(models.r_cov, dtype=np.float64)
        if r_cov.shape != (m, m):
            raise DimensionError("R must be m×m for the measurement vector", r_cov.shape, y.shape)

        x_prior = est.x_hat
        transform = None if is_diagonal(r_cov, tol.diagonal) else self._decorrelation_for(r_cov)

        def transformed(x: np.ndarray, index: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
            predicted = np.asarray(models.predict(x), dtype=np.float64).ravel()
            h_jac = np.asarray(models.jacobian_h(x), dtype=np.float64)
            if predicted.shape != (m,) or h_jac.shape != (m, n):
                raise DimensionError("h(x) / H(x) do not match y and the state",
                                     predicted.shape, h_jac.shape, (m, n))
            if not (np.all(np.isfinite(predicted)) and np.all(np.isfinite(h_jac))):
                raise InnovationNotFiniteError(est.epoch, index)
            # measured value consistent with the prediction (angle residuals are unwrapped)
            measured = predicted + models.innovation(y, predicted)
            if transform is None:
                return measured, predicted, h_jac
            return transform.solve(measured), transform.solve(predicted), transform.solve(h_jac)

        r_diag = transform.d_r.values if transform is not None else np.diag(r_cov)
        z, z_pred, h_z = transformed(x_prior, 0)
        x = x_prior.copy()
        factors = est.factors

        for i in range(m):
            if self.options.relinearize and i > 0:
                z, z_pred, h_z = transformed(x, i)
                predicted_i = z_pred[i]
            else:
                predicted_i = z_pred[i] + float(h_z[i] @ (x - x_prior))
            try:
                meas = ScalarMeasurement(h_z[i], r_diag[i], z[i], predicted_i)
            except NonFiniteError as exc:
                raise InnovationNotFiniteError(est.epoch, i) from exc

            result = modified_agee_turner(factors, meas)
            x = x + result.gain * result.innovation
            if not (np.isfinite(result.innovation_variance) and np.all(np.isfinite(x))):
                raise InnovationNotFiniteError(est.epoch, i)

            factors = self._monitor(result.factors, est.epoch, delta)
            delta.innovations.append(
                InnovationRecord(est.epoch, i, result.innovation, result.innovation_variance)
            )

        return StateEstimate(x, factors, est.epoch), delta

    # ── Run ───────────────────────────────────────────────────────────────────

    def run(
        self,
        init: StateEstimate,
        process: ProcessModel,
        meas: MeasurementModelSet,
        inputs: Iterable[Step],
        diagnostics: Optional[FilterDiagnostics] = None,
    ) -> FilterRun:
        """Alternate propagation and update per (u, y); y None means propagate only.

        diagnostics, when given, is extended in place (initialize() may
        already have written to it).
        """
        diagnostics = diagnostics if diagnostics is not None else FilterDiagnostics()
        diagnostics.psd_flags.append((init.epoch, is_psd(init.factors).ok))
        trajectory: List[StateEstimate] = [init]
        est = init
        try:
            for u, y in inputs:
                est = self.time_update(est, process, u, diagnostics)
                if y is not None:
                    est, delta = self.measurement_update(est, meas, y)
                    diagnostics.extend(delta)
                diagnostics.psd_flags.append((est.epoch, is_psd(est.factors).ok))
                trajectory.append(est)
        except UDFilterError as exc:
            logger.error("UD filter halted at epoch %d: %s", trajectory[-1].epoch + 1, exc)
            return FilterRun(trajectory, diagnostics, exc)
        return FilterRun(trajectory, diagnostics)

    # ── Internal helpers ──────────────────────────────────────────────────────

    def _decorrelation_for(self, r_cov: np.ndarray) -> DecorrelationTransform:
        key = str(r_cov.shape).encode() + r_cov.tobytes()
        if self._decorrelation is None or key != self._decorrelation_key:
            self._decorrelation = build_decorrelation(r_cov)
            self._decorrelation_key = key
        return self._decorrelation

    @staticmethod
    def _record_clamped(clamped, epoch: int, sink: Optional[FilterDiagnostics]) -> None:
        for idx, value in clamped:
            logger.info("epoch %d: D[%d] = %.3e is round-off, read as 0", epoch, idx, value)
            if sink is not None:
                sink.negative_d_events.append(NegativeDEvent(epoch, idx, value))

    def _monitor(self, factors: UDFactors, epoch: int, sink: FilterDiagnostics) -> UDFactors:
        d = factors.d.values
        negative = np.flatnonzero(d < 0.0)
        if not negative.size:
            return factors
        for idx in negative:
            sink.negative_d_events.append(NegativeDEvent(epoch, int(idx), float(d[idx])))
            logger.warning("epoch %d: D[%d] = %.3e is negative", epoch, idx, d[idx])
        if self.options.enforce_psd:
            return UDFactors(factors.u, DiagonalVector(np.maximum(d, 0.0)))
        return factors


def run_filter(
    init: StateEstimate,
    process: ProcessModel,
    meas: MeasurementModelSet,
    inputs: Iterable[Step],
    options: Optional[FilterOptions] = None,
) -> FilterRun:
    return UDFilter(options).run(init, process, meas, inputs)
