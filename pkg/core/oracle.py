"""
Conventional covariance-form EKF, used to check the UD filter.

    P⁻ = F P⁺ Fᵀ + G Q Gᵀ
    K  = P⁻ Hᵀ (H P⁻ Hᵀ + R)⁻¹
    P⁺ = (I − K H) P⁻ (I − K H)ᵀ + K R Kᵀ      Joseph form (default)
    P⁺ = (I − K H) P⁻                          naive form (joseph=False)

The update is a batch over the whole measurement vector with the full R, so
it also checks the decorrelated sequential path.  The naive form is kept for
the stress comparison; it drifts from symmetry and can lose definiteness.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, List, Tuple

import numpy as np

from core.errors import DimensionError, InnovationNotFiniteError, UDFilterError
from core.filter import FilterDiagnostics, FilterRun, InnovationRecord, NegativeDEvent, Step
from core.matrix import as_matrix, as_vector
from core.models import MeasurementModelSet, ProcessModel

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class DenseEstimate:
    """State mean with the full covariance matrix."""

    x_hat: np.ndarray
    covariance: np.ndarray
    epoch: int = 0

    @property
    def asymmetry(self) -> float:
        return float(np.max(np.abs(self.covariance - self.covariance.T)))

    def min_eigenvalue(self) -> float:
        sym = 0.5 * (self.covariance + self.covariance.T)
        return float(np.linalg.eigvalsh(sym)[0])


def naive_scalar_update(p: np.ndarray, h: np.ndarray, r: float) -> Tuple[np.ndarray, np.ndarray, float]:
    """P ← (I − k h) P for one scalar measurement; returns (P⁺, k, innovation variance)."""
    ph = p @ h
    s = float(h @ ph) + r
    k = ph / s
    return p - np.outer(k, h @ p), k, s


class DenseFilter:
    """Covariance-form EKF with the same call pattern as UDFilter."""

    def __init__(self, joseph: bool = True) -> None:
        self.joseph = joseph

    def initialize(self, x0, p0) -> DenseEstimate:
        x0 = as_vector(x0, "x0")
        p0 = np.array(as_matrix(p0, "P0"))
        if p0.shape != (x0.size, x0.size):
            raise DimensionError("x0 and P0 differ in size", x0.shape, p0.shape)
        return DenseEstimate(x0, p0, 0)

    def time_update(self, est: DenseEstimate, model: ProcessModel, u=None) -> DenseEstimate:
        u_vec = np.zeros(0) if u is None else np.atleast_1d(np.asarray(u, dtype=np.float64))
        x = est.x_hat
        f = np.asarray(model.jacobian_f(x, u_vec), dtype=np.float64)
        g = np.asarray(model.jacobian_g(x, u_vec), dtype=np.float64)
        q = np.asarray(model.q_cov, dtype=np.float64)
        n = x.size
        if f.shape != (n, n) or g.shape[0] != n or q.shape != (g.shape[1], g.shape[1]):
            raise DimensionError("F, G, Q do not conform", f.shape, g.shape, q.shape)
        p = f @ est.covariance @ f.T + g @ q @ g.T
        x_next = np.asarray(model.propagate_state(x, u_vec), dtype=np.float64)
        return DenseEstimate(x_next, p, est.epoch + 1)

    def measurement_update(
        self,
        est: DenseEstimate,
        models: MeasurementModelSet,
        y,
    ) -> Tuple[DenseEstimate, FilterDiagnostics]:
        delta = FilterDiagnostics()
        y = as_vector(y, "y")
        x = est.x_hat
        p = est.covariance
        r = np.asarray(models.r_cov, dtype=np.float64)
        predicted = np.asarray(models.predict(x), dtype=np.float64).ravel()
        h = np.asarray(models.jacobian_h(x), dtype=np.float64)
        if h.shape != (y.size, x.size) or r.shape != (y.size, y.size):
            raise DimensionError("H, R do not match y and the state", h.shape, r.shape, y.shape)
        if not (np.all(np.isfinite(predicted)) and np.all(np.isfinite(h))):
            raise InnovationNotFiniteError(est.epoch, 0)

        e = models.innovation(y, predicted)
        s = h @ p @ h.T + r
        k = np.linalg.solve(s, h @ p).T
        a = np.eye(x.size) - k @ h
        if self.joseph:
            p_next = a @ p @ a.T + k @ r @ k.T
        else:
            p_next = a @ p

        for i in range(y.size):
            delta.innovations.append(InnovationRecord(est.epoch, i, float(e[i]), float(s[i, i])))
        return DenseEstimate(x + k @ e, p_next, est.epoch), delta

    def run(
        self,
        init: DenseEstimate,
        process: ProcessModel,
        meas: MeasurementModelSet,
        inputs: Iterable[Step],
    ) -> FilterRun:
        diagnostics = FilterDiagnostics()
        trajectory: List[DenseEstimate] = [init]
        self._record_definiteness(init, diagnostics)
        est = init
        try:
            for u, y in inputs:
                est = self.time_update(est, process, u)
                if y is not None:
                    est, delta = self.measurement_update(est, meas, y)
                    diagnostics.extend(delta)
                self._record_definiteness(est, diagnostics)
                trajectory.append(est)
        except (UDFilterError, np.linalg.LinAlgError) as exc:
            logger.error("dense filter halted at epoch %d: %s", trajectory[-1].epoch + 1, exc)
            failure = exc if isinstance(exc, UDFilterError) else UDFilterError(str(exc))
            return FilterRun(trajectory, diagnostics, failure)
        return FilterRun(trajectory, diagnostics)

    @staticmethod
    def _record_definiteness(est: DenseEstimate, sink: FilterDiagnostics) -> None:
        """PSD flag from the smallest eigenvalue; a negative one is logged as index 0."""
        low = est.min_eigenvalue()
        sink.psd_flags.append((est.epoch, low >= 0.0))
        if low < 0.0:
            sink.negative_d_events.append(NegativeDEvent(est.epoch, 0, low))


def oracle_dense_ekf(
    init: DenseEstimate,
    process: ProcessModel,
    meas: MeasurementModelSet,
    inputs: Iterable[Step],
    joseph: bool = True,
) -> FilterRun:
    return DenseFilter(joseph).run(init, process, meas, inputs)
