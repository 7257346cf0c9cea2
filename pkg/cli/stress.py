"""
Stress benchmark: UD updates against the naive dense update on ill-conditioned priors.

Each trial (seed + trial index, shared across exponents):

    U₀, D₀ = unit upper-triangular U, D log-spaced 1 … 10⁻ᵉ;  P₀ = U₀ D₀ U₀ᵀ
    r      = 10⁻²ᵉ                     measurement σ = 10⁻ᵉ against a unit prior
    H      = n×n standard normal rows
    epochs × (propagate with F = I and no process noise, then n scalar updates)

Both sides start from the same P₀; the UD side takes U₀, D₀ as they are, so
no decomposition can reject the prior.  With e ≥ 8, h P hᵀ / r passes 1/ε and
the dense update (I − k h) P cancels below its own rounding error.

Per trial the table keeps:

    ud_anomalies     negative-D events recorded by the UD filter
    ud_errors        1 if a UD error stopped the trial (kept apart from the above)
    dense_anomalies  scalar updates after which the naive P has a non-finite
                     entry, a non-positive innovation variance (the trial stops)
                     or a negative eigenvalue of (P + Pᵀ)/2
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from cli.noise import NoiseSource
from core.errors import UDFilterError
from core.factorization import UDFactors
from core.filter import FilterDiagnostics, StateEstimate, UDFilter
from core.models import linear_measurement, linear_process
from core.oracle import naive_scalar_update
from version import SCHEMA_VERSION

logger = logging.getLogger(__name__)

MAX_EXPONENT = 14.0


@dataclass(frozen=True)
class StressRow:
    exponent: float
    trial: int
    ud_anomalies: int
    ud_errors: int
    dense_anomalies: int
    dense_min_eigenvalue: float


@dataclass
class StressReport:
    seed: int
    trials: int
    exponents: List[float]
    rows: List[StressRow] = field(default_factory=list)
    schema: str = SCHEMA_VERSION

    def totals(self) -> List[Tuple[float, int, int, int, float]]:
        """(exponent, UD anomalies, UD errors, dense anomalies, smallest dense eigenvalue) per exponent."""
        out = []
        for e in self.exponents:
            rows = [r for r in self.rows if r.exponent == e]
            if not rows:
                continue
            out.append((
                e,
                sum(r.ud_anomalies for r in rows),
                sum(r.ud_errors for r in rows),
                sum(r.dense_anomalies for r in rows),
                min(r.dense_min_eigenvalue for r in rows),
            ))
        return out

    def ud_total(self, exponent: float) -> int:
        """UD anomalies plus trials a UD error stopped."""
        return sum(r.ud_anomalies + r.ud_errors for r in self.rows if r.exponent == exponent)

    def dense_total(self, exponent: float) -> int:
        return sum(r.dense_anomalies for r in self.rows if r.exponent == exponent)


# ---------------------------------------------------------------------------
# One trial
# ---------------------------------------------------------------------------

def _ud_anomalies(factors: UDFactors, h: np.ndarray, ys: np.ndarray, r: float, epochs: int) -> Tuple[int, int]:
    n = factors.dim
    process = linear_process(np.eye(n), np.zeros((n, 0)), np.zeros((0, 0)))
    meas = linear_measurement(h, r * np.eye(n))
    ud = UDFilter()
    sink = FilterDiagnostics()
    est = StateEstimate(np.zeros(n), factors)
    try:
        for k in range(epochs):
            est = ud.time_update(est, process, diagnostics=sink)
            est, delta = ud.measurement_update(est, meas, ys[k])
            sink.extend(delta)
    except UDFilterError as exc:
        logger.debug("UD trial stopped: %s", exc)
        return len(sink.negative_d_events), 1
    return len(sink.negative_d_events), 0


def _dense_anomalies(p0: np.ndarray, h: np.ndarray, r: float, epochs: int) -> Tuple[int, float]:
    n = p0.shape[0]
    p = p0.copy()
    count = 0
    lowest = float("inf")
    with np.errstate(all="ignore"):
        for _ in range(epochs):
            for i in range(n):
                p, _, s = naive_scalar_update(p, h[i], r)
                if not (np.all(np.isfinite(p)) and s > 0.0):
                    return count + 1, lowest
                low = float(np.linalg.eigvalsh(0.5 * (p + p.T))[0])
                lowest = min(lowest, low)
                if low < 0.0:
                    count += 1
    return count, lowest


def run_trial(task: Tuple[float, int, int, int, int]) -> StressRow:
    """One (exponent, trial) cell; top-level so worker processes can pickle it."""
    exponent, trial, seed, n, epochs = task
    noise = NoiseSource(seed + trial)
    u0, d0 = noise.conditioned_ud(n, exponent)
    h = noise.matrix(n, n)
    r = 10.0 ** (-2.0 * exponent)
    ys = noise.matrix(epochs, n) * np.sqrt(r)
    factors = UDFactors.from_arrays(u0, d0)
    ud, errors = _ud_anomalies(factors, h, ys, r, epochs)
    dense, lowest = _dense_anomalies(factors.covariance(), h, r, epochs)
    return StressRow(float(exponent), trial, ud, errors, dense, lowest)


# ---------------------------------------------------------------------------
# Benchmark
# ---------------------------------------------------------------------------

def stress_benchmark(
    condition_exponents: Sequence[float],
    trials: int,
    seed: int,
    n: int = 6,
    epochs: int = 3,
    workers: int = 1,
) -> StressReport:
    exponents = [float(e) for e in condition_exponents]
    for e in exponents:
        if not 0.0 <= e <= MAX_EXPONENT:
            raise ValueError(f"condition exponent {e} outside [0, {MAX_EXPONENT:g}]")
    if trials < 0:
        raise ValueError("trials must be non-negative")

    report = StressReport(seed, trials, exponents)
    tasks: List[Tuple[float, int, int, int, int]] = [
        (e, t, seed, n, epochs) for e in exponents for t in range(trials)
    ]
    if not tasks:
        return report

    rows: Iterable[StressRow]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run_trial, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        rows = [run_trial(task) for task in tasks]
    report.rows.extend(rows)

    for e, ud, errors, dense, low in report.totals():
        logger.info("exponent %g: UD anomalies %d (errors %d), dense anomalies %d, dense min eig %.3e",
                    e, ud, errors, dense, low)
    return report
