"""
Scenario runner: simulate a truth trajectory, filter it, tabulate the result.

Truth simulation (one NoiseSource per run, seeded with the scenario seed):

    for k = 1 .. steps:
        w_k ~ N(0, Q)                      drawn first
        x_k = f(x_{k−1}, u) + G w_k
        if k % measure_every == 0:
            v_k ~ N(0, R)                  drawn second
            y_k = h(x_k) + v_k

Mode "both" runs the UD filter and the Joseph-form dense EKF on the same
measurements and records, per epoch:

    state divergence       ‖x̂_ud − x̂_dense‖∞ / max(1, ‖x̂_dense‖∞)
    covariance divergence  ‖P_ud − P_dense‖_F / ‖P_dense‖_F
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy.stats import chi2

from cli.noise import NoiseSource
from cli.scenario import ScenarioConfig
from core.config import FilterOptions
from core.filter import FilterDiagnostics, FilterRun, Step, UDFilter
from core.models import (
    MeasurementModelSet,
    ProcessModel,
    constant_velocity_models,
    linear_measurement,
    linear_process,
    range_bearing_models,
    scalar_models,
)
from core.oracle import DenseFilter
from version import SCHEMA_VERSION

logger = logging.getLogger(__name__)

# Two-sided 95 % gate on a squared normalised scalar innovation
GATE_PROBABILITY = 0.95


# ---------------------------------------------------------------------------
# Report containers
# ---------------------------------------------------------------------------

@dataclass
class StepRecord:
    """One row of the trajectory table."""

    epoch: int
    x_hat: np.ndarray
    d: np.ndarray
    """D entries (ud/both) or the covariance diagonal (dense)."""

    psd: bool
    truth: np.ndarray
    innovations: List[float] = field(default_factory=list)
    variances: List[float] = field(default_factory=list)
    state_divergence: Optional[float] = None
    covariance_divergence: Optional[float] = None


@dataclass
class RunReport:
    schema: str
    name: str
    mode: str
    records: List[StepRecord]
    summary: Dict[str, Any]
    wall_time: float = 0.0
    """Seconds spent filtering; logged, never written to output files."""

    failure: Optional[str] = None
    halted_epoch: Optional[int] = None

    @property
    def state_dim(self) -> int:
        return int(self.records[0].x_hat.size) if self.records else 0

    @property
    def ok(self) -> bool:
        return self.failure is None


# ---------------------------------------------------------------------------
# Model construction and truth simulation
# ---------------------------------------------------------------------------

def build_models(cfg: ScenarioConfig) -> Tuple[ProcessModel, MeasurementModelSet]:
    if cfg.model == "scalar":
        return scalar_models(cfg.a, float(cfg.q_cov[0, 0]), float(cfg.r_cov[0, 0]))
    if cfg.model == "constant-velocity":
        return constant_velocity_models(cfg.dt, cfg.q_cov, cfg.r_cov)
    if cfg.model == "range-bearing":
        return range_bearing_models(cfg.dt, cfg.q_cov, cfg.r_cov)
    return linear_process(cfg.f, cfg.g, cfg.q_cov), linear_measurement(cfg.h, cfg.r_cov)


def simulate(
    cfg: ScenarioConfig,
    process: ProcessModel,
    meas: MeasurementModelSet,
) -> Tuple[List[np.ndarray], List[Step]]:
    """Truth states (epoch 0 first) and the (u, y) stream the filters consume."""
    noise = NoiseSource(cfg.seed)
    x = np.array(cfg.truth_x0 if cfg.truth_x0 is not None else cfg.x0, dtype=np.float64)
    u = np.zeros(0)
    truth = [x.copy()]
    steps: List[Step] = []
    for k in range(1, cfg.steps + 1):
        g = np.asarray(process.jacobian_g(x, u), dtype=np.float64)
        x = np.asarray(process.propagate_state(x, u), dtype=np.float64) + g @ noise.gaussian(cfg.q_cov)
        truth.append(x.copy())
        y = None
        if k % cfg.measure_every == 0:
            y = np.asarray(meas.predict(x), dtype=np.float64) + noise.gaussian(cfg.r_cov)
        steps.append((None, y))
    return truth, steps


# ---------------------------------------------------------------------------
# Run
# ---------------------------------------------------------------------------

def _innovation_table(run: FilterRun) -> Dict[int, Tuple[List[float], List[float]]]:
    table: Dict[int, Tuple[List[float], List[float]]] = {}
    for rec in run.diagnostics.innovations:
        e, s = table.setdefault(rec.epoch, ([], []))
        e.append(rec.innovation)
        s.append(rec.variance)
    return table


def _records(run: FilterRun, truth: List[np.ndarray], dense: bool) -> List[StepRecord]:
    innovations = _innovation_table(run)
    psd = dict(run.diagnostics.psd_flags)
    out = []
    for est in run.trajectory:
        d = np.diag(est.covariance).copy() if dense else est.d.copy()
        e, s = innovations.get(est.epoch, ([], []))
        out.append(StepRecord(est.epoch, est.x_hat.copy(), d, psd.get(est.epoch, True),
                              truth[est.epoch], list(e), list(s)))
    return out


def _divergence(ud_run: FilterRun, dense_run: FilterRun, records: List[StepRecord]) -> None:
    for rec, ud, dn in zip(records, ud_run.trajectory, dense_run.trajectory):
        dx = np.max(np.abs(ud.x_hat - dn.x_hat))
        rec.state_divergence = float(dx / max(1.0, float(np.max(np.abs(dn.x_hat)))))
        p_norm = np.linalg.norm(dn.covariance)
        dp = np.linalg.norm(ud.covariance - dn.covariance)
        rec.covariance_divergence = float(dp / p_norm) if p_norm > 0.0 else float(dp)


def _gate_fraction(run: FilterRun) -> Tuple[int, Optional[float]]:
    bound = chi2.ppf(GATE_PROBABILITY, df=1)
    scores = [rec.normalized ** 2 for rec in run.diagnostics.innovations]
    if not scores:
        return 0, None
    inside = sum(1 for s in scores if s <= bound)
    return len(scores), inside / len(scores)


def _failure(run: Optional[FilterRun]) -> Tuple[Optional[str], Optional[int]]:
    if run is None or run.failure is None:
        return None, None
    return f"{type(run.failure).__name__}: {run.failure}", run.halted_epoch


def run_scenario(cfg: ScenarioConfig) -> RunReport:
    """Deterministic for a given config: same seed, same records."""
    process, meas = build_models(cfg)
    truth, steps = simulate(cfg, process, meas)

    ud_run: Optional[FilterRun] = None
    dense_run: Optional[FilterRun] = None
    started = time.perf_counter()
    if cfg.mode in ("ud", "both"):
        options = FilterOptions(relinearize=cfg.relinearize, enforce_psd=cfg.enforce_psd)
        ud_filter = UDFilter(options)
        sink = FilterDiagnostics()
        ud_run = ud_filter.run(ud_filter.initialize(cfg.x0, cfg.p0, sink), process, meas, steps, sink)
    if cfg.mode in ("dense", "both"):
        dense_filter = DenseFilter(joseph=True)
        dense_run = dense_filter.run(dense_filter.initialize(cfg.x0, cfg.p0), process, meas, steps)
    wall_time = time.perf_counter() - started

    primary = ud_run if ud_run is not None else dense_run
    records = _records(primary, truth, dense=ud_run is None)
    if ud_run is not None and dense_run is not None:
        _divergence(ud_run, dense_run, records)

    failure, halted = _failure(ud_run)
    if failure is None:
        failure, halted = _failure(dense_run)

    count, fraction = _gate_fraction(primary)
    summary: Dict[str, Any] = {
        "schema": SCHEMA_VERSION,
        "name": cfg.name,
        "model": cfg.model,
        "mode": cfg.mode,
        "seed": cfg.seed,
        "steps": cfg.steps,
        "records": len(records),
        "noise": NoiseSource.ALGORITHM,
        "negative_d_events": len(primary.diagnostics.negative_d_events),
        "degenerate_events": len(primary.diagnostics.degenerate_events),
        "innovation_count": count,
        "innovation_gate_fraction": fraction,
        "failure": failure,
        "halted_epoch": halted,
    }
    if ud_run is not None and dense_run is not None:
        compared = [r for r in records if r.state_divergence is not None]
        summary["max_state_divergence"] = max((r.state_divergence for r in compared), default=None)
        summary["max_covariance_divergence"] = max((r.covariance_divergence for r in compared), default=None)
    if dense_run is not None:
        summary["dense_max_asymmetry"] = max(est.asymmetry for est in dense_run.trajectory)
        summary["dense_min_eigenvalue"] = min(est.min_eigenvalue() for est in dense_run.trajectory)
        summary["dense_negative_eigenvalue_events"] = len(dense_run.diagnostics.negative_d_events)

    logger.info("scenario %r (%s, %d steps) filtered in %.3f s",
                cfg.name, cfg.mode, cfg.steps, wall_time)
    if failure is not None:
        logger.error("scenario %r halted at epoch %s: %s", cfg.name, halted, failure)

    return RunReport(SCHEMA_VERSION, cfg.name, cfg.mode, records, summary,
                     wall_time, failure, halted)

