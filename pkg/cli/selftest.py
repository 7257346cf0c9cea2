"""
Built-in self test: property and oracle checks on seeded random problems.

Each check builds its problems from a NoiseSource so a failure can be
reproduced from the printed seed.  All checks together run in a few seconds.
"""

from __future__ import annotations

import inspect
import logging
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List

import numpy as np

import core.factorization
from cli.noise import NoiseSource
from cli.report import summary_json, write_trajectory_csv
from cli.runner import run_scenario
from cli.scenario import ScenarioConfig, parse_scenario_text, serialize_scenario
from cli.stress import stress_benchmark
from core.decorrelation import build_decorrelation
from core.factorization import udu_decompose
from core.filter import StateEstimate, UDFilter
from core.models import linear_measurement
from core.oracle import DenseEstimate, DenseFilter
from core.propagation import PropagationInputs, build_candidate, wmgs
from core.update import (
    RankOneInputs,
    ScalarMeasurement,
    direct_ud_update,
    modified_agee_turner,
    standard_agee_turner,
)

logger = logging.getLogger(__name__)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    scale = float(np.linalg.norm(b))
    diff = float(np.linalg.norm(np.asarray(a) - np.asarray(b)))
    return diff / scale if scale > 0.0 else diff


# ── Checks ────────────────────────────────────────────────────────────────────

def check_udu_round_trip(seed: int) -> CheckResult:
    worst = 0.0
    for i in range(200):
        p = NoiseSource(seed + i).spd(1 + i % 20)
        worst = max(worst, _rel(udu_decompose(p).covariance(), p))
    root_free = "sqrt" not in inspect.getsource(core.factorization)
    return CheckResult("udu round trip", worst <= 1e-11 and root_free,
                       f"worst rel error {worst:.2e}, root-free={root_free}")


def check_wmgs(seed: int) -> CheckResult:
    worst_p = worst_w = worst_orth = 0.0
    for i in range(100):
        noise = NoiseSource(seed + i)
        n, q = 1 + i % 12, 1 + i % 6
        prior = udu_decompose(noise.spd(n))
        f = noise.matrix(n, n)
        g = noise.matrix(n, q)
        q_cov = noise.spd(q) if i % 2 else np.diag(noise.uniform(q) + 0.1)
        ws = build_candidate(PropagationInputs(f, g, q_cov, prior))
        out = wmgs(ws)
        p = prior.covariance()
        dense = f @ p @ f.T + g @ q_cov @ g.T
        worst_p = max(worst_p, _rel(out.covariance(), dense))
        worst_w = max(worst_w, _rel(out.u.to_dense() @ ws.v_rows, ws.w_rows))
        gram = (ws.v_rows * ws.d_hat.values) @ ws.v_rows.T
        scale = np.sqrt(np.outer(np.diag(gram), np.diag(gram)))
        off = np.abs(gram - np.diag(np.diag(gram)))
        worst_orth = max(worst_orth, float(np.max(off / np.where(scale > 0.0, scale, 1.0))))
    ok = worst_p <= 1e-10 and worst_w <= 1e-11 and worst_orth <= 1e-9
    return CheckResult("wmgs propagation", ok,
                       f"P {worst_p:.2e}, W=UV {worst_w:.2e}, orthogonality {worst_orth:.2e}")


def _scalar_case(noise: NoiseSource, n: int):
    prior = udu_decompose(noise.spd(n))
    h = noise.normal(n)
    r = float(noise.uniform(1)[0]) + 0.1
    return prior, ScalarMeasurement(h, r, 0.0, 0.0)


def check_scalar_updates(seed: int) -> List[CheckResult]:
    worst_k = worst_p = worst_alpha = worst_direct = 0.0
    for i in range(200):
        prior, meas = _scalar_case(NoiseSource(seed + i), 1 + i % 10)
        p = prior.covariance()
        ph = p @ meas.h_row
        s = float(meas.h_row @ ph) + meas.r_scalar
        dense = p - np.outer(ph, ph) / s
        res = modified_agee_turner(prior, meas)
        direct = direct_ud_update(prior, meas)
        worst_k = max(worst_k, _rel(res.gain, ph / s))
        worst_p = max(worst_p, _rel(res.factors.covariance(), dense))
        worst_alpha = max(worst_alpha, abs(res.innovation_variance - s) / s)
        worst_direct = max(worst_direct, _rel(direct.factors.covariance(), res.factors.covariance()))
    return [
        CheckResult("modified Agee-Turner", worst_k <= 1e-10 and worst_p <= 1e-10 and worst_alpha <= 1e-12,
                    f"gain {worst_k:.2e}, posterior {worst_p:.2e}, alpha {worst_alpha:.2e}"),
        CheckResult("direct UD update", worst_direct <= 1e-9, f"vs Agee-Turner {worst_direct:.2e}"),
    ]


def check_rank_one(seed: int) -> CheckResult:
    worst = 0.0
    exact_noop = True
    for i in range(100):
        noise = NoiseSource(seed + i)
        n = 1 + i % 10
        factors = udu_decompose(noise.spd(n))
        c = float(noise.uniform(1)[0])
        a = noise.normal(n)
        out = standard_agee_turner(RankOneInputs(factors, c, a))
        worst = max(worst, _rel(out.covariance(), factors.covariance() + c * np.outer(a, a)))
        same = standard_agee_turner(RankOneInputs(factors, 0.0, a))
        exact_noop &= (np.array_equal(same.u.packed, factors.u.packed)
                       and np.array_equal(same.d.values, factors.d.values))
    return CheckResult("standard Agee-Turner", worst <= 1e-10 and exact_noop,
                       f"worst rel error {worst:.2e}, c=0 bit-exact={exact_noop}")


def check_decorrelation(seed: int) -> CheckResult:
    worst = worst_identity = 0.0
    for i in range(50):
        noise = NoiseSource(seed + i)
        n, m = 4, 1 + i % 4
        p = noise.spd(n)
        h = noise.matrix(m, n)
        r = noise.spd(m)
        x0 = noise.normal(n)
        y = noise.normal(m)
        meas = linear_measurement(h, r)

        est, _ = UDFilter().measurement_update(StateEstimate(x0, udu_decompose(p)), meas, y)
        ref, _ = DenseFilter().measurement_update(DenseEstimate(x0, p), meas, y)
        worst = max(worst, _rel(est.covariance, ref.covariance), _rel(est.x_hat, ref.x_hat))

        t = build_decorrelation(r)
        left = t.solve(r)
        d_r = t.solve(left.T).T
        worst_identity = max(worst_identity, _rel(d_r, t.d_r.as_matrix()))
    return CheckResult("decorrelation", worst <= 1e-9 and worst_identity <= 1e-11,
                       f"sequential vs batch {worst:.2e}, identity {worst_identity:.2e}")


def _linear_config(noise: NoiseSource, i: int, seed: int) -> ScenarioConfig:
    n, q, m = 2 + i % 4, 1 + i % 2, 1 + i % 3
    basis, _ = np.linalg.qr(noise.matrix(n, n))
    return ScenarioConfig(
        model="custom-linear", n=n, q=q, m=m,
        x0=noise.normal(n), p0=noise.spd(n), q_cov=0.1 * noise.spd(q), r_cov=noise.spd(m),
        f=0.98 * basis, g=noise.matrix(n, q), h=noise.matrix(m, n),
        steps=50, seed=seed + i, mode="both", name=f"linear-{i}",
    )


def check_end_to_end(seed: int) -> CheckResult:
    worst_x = worst_p = 0.0
    negatives = 0
    for i in range(20):
        report = run_scenario(_linear_config(NoiseSource(seed + 1000 + i), i, seed))
        if report.failure is not None:
            return CheckResult("UD vs dense EKF", False, f"scenario {i} halted: {report.failure}")
        worst_x = max(worst_x, report.summary["max_state_divergence"])
        worst_p = max(worst_p, report.summary["max_covariance_divergence"])
        negatives += report.summary["negative_d_events"]
    return CheckResult("UD vs dense EKF", worst_x <= 1e-9 and worst_p <= 1e-9 and negatives == 0,
                       f"state {worst_x:.2e}, covariance {worst_p:.2e}, negative D {negatives}")


def check_stress(seed: int) -> CheckResult:
    report = stress_benchmark([12.0], trials=100, seed=seed)
    ud, dense = report.ud_total(12.0), report.dense_total(12.0)
    return CheckResult("stress ordering at 1e12", ud <= dense and dense > 0, f"UD {ud}, naive dense {dense}")


def check_determinism(seed: int) -> CheckResult:
    cfg = _linear_config(NoiseSource(seed), 1, seed)
    round_trip = serialize_scenario(parse_scenario_text(serialize_scenario(cfg))) == serialize_scenario(cfg)
    blobs = []
    with tempfile.TemporaryDirectory() as tmp:
        for k in range(2):
            report = run_scenario(cfg)
            path = write_trajectory_csv(report, Path(tmp) / f"run{k}.csv")
            blobs.append(path.read_bytes() + summary_json(report).encode())
    same = blobs[0] == blobs[1]
    return CheckResult("run determinism", same and round_trip,
                       f"byte-identical={same}, scenario round trip={round_trip}")


# ── Driver ────────────────────────────────────────────────────────────────────

def run_selftest(seed: int = 0) -> List[CheckResult]:
    checks: List[Callable[[int], object]] = [
        check_udu_round_trip,
        check_wmgs,
        check_scalar_updates,
        check_rank_one,
        check_decorrelation,
        check_end_to_end,
        check_stress,
        check_determinism,
    ]
    results: List[CheckResult] = []
    for check in checks:
        out = check(seed)
        for res in out if isinstance(out, list) else [out]:
            (logger.info if res.passed else logger.error)("selftest %-26s %s  %s",
                                                         res.name, "ok" if res.passed else "FAIL", res.detail)
            results.append(res)
    return results
