"""
Output writers for RunReport and StressReport.

Trajectory CSV, one row per epoch:

    schema, epoch, x0..x{n-1}, d0..d{n-1} (pdiag0.. in dense mode), psd_flag
    [, state_divergence, covariance_divergence]     mode "both" only

Floats are written with 17 significant digits so a file reproduces the
doubles exactly.  The JSON summary is written with sorted keys; nothing
time-dependent goes into either file.
"""

from __future__ import annotations

import csv
import json
import logging
from pathlib import Path
from typing import Any, List

from cli.runner import RunReport

logger = logging.getLogger(__name__)


def _fmt(v: Any) -> str:
    if v is None:
        return ""
    return f"{float(v):.17g}"


def trajectory_header(report: RunReport) -> List[str]:
    n = report.state_dim
    d_name = "pdiag" if report.mode == "dense" else "d"
    header = ["schema", "epoch"]
    header += [f"x{i}" for i in range(n)]
    header += [f"{d_name}{i}" for i in range(n)]
    header.append("psd_flag")
    if report.mode == "both":
        header += ["state_divergence", "covariance_divergence"]
    return header


def write_trajectory_csv(report: RunReport, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(trajectory_header(report))
        for rec in report.records:
            row = [report.schema, rec.epoch]
            row += [_fmt(v) for v in rec.x_hat]
            row += [_fmt(v) for v in rec.d]
            row.append(int(rec.psd))
            if report.mode == "both":
                row += [_fmt(rec.state_divergence), _fmt(rec.covariance_divergence)]
            writer.writerow(row)
    logger.info("wrote %d trajectory rows to %s", len(report.records), path)
    return path


def summary_json(report: RunReport) -> str:
    return json.dumps(report.summary, sort_keys=True, indent=2) + "\n"


def write_summary_json(report: RunReport, path) -> Path:
    path = Path(path)
    path.write_text(summary_json(report), encoding="utf-8")
    logger.info("wrote summary to %s", path)
    return path


def format_summary(report: RunReport) -> str:
    """Human-readable summary for the terminal."""
    s = report.summary
    lines = [
        f"{s['schema']}  {s['name'] or '(unnamed)'}  model={s['model']}  mode={s['mode']}",
        f"  epochs            : {s['records']} of {s['steps'] + 1}",
        f"  negative-D events : {s['negative_d_events']}",
        f"  degenerate dirs   : {s['degenerate_events']}",
    ]
    if s["innovation_gate_fraction"] is not None:
        lines.append(f"  innovations       : {s['innovation_count']} "
                     f"({100.0 * s['innovation_gate_fraction']:.1f}% inside 95% gate)")
    if s.get("max_state_divergence") is not None:
        lines.append(f"  max divergence    : state {s['max_state_divergence']:.3e}, "
                     f"covariance {s['max_covariance_divergence']:.3e}")
    if "dense_min_eigenvalue" in s:
        lines.append(f"  dense filter      : min eig {s['dense_min_eigenvalue']:.3e}, "
                     f"max asymmetry {s['dense_max_asymmetry']:.3e}")
    if report.failure is not None:
        lines.append(f"  HALTED at epoch {report.halted_epoch}: {report.failure}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Stress table
# ---------------------------------------------------------------------------

def write_stress_csv(report, path) -> Path:
    """StressReport rows: schema, exponent, trial, UD anomalies and errors, dense anomalies, dense min eigenvalue."""
    path = Path(path)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["schema", "exponent", "trial", "ud_anomalies", "ud_errors",
                         "dense_anomalies", "dense_min_eigenvalue"])
        for row in report.rows:
            writer.writerow([report.schema, _fmt(row.exponent), row.trial, row.ud_anomalies, row.ud_errors,
                             row.dense_anomalies, _fmt(row.dense_min_eigenvalue)])
    logger.info("wrote %d stress rows to %s", len(report.rows), path)
    return path


def format_stress(report) -> str:
    lines = [f"{report.schema}  stress  seed={report.seed}  trials={report.trials}",
             f"  {'exponent':>8}  {'UD anomalies':>12}  {'UD errors':>9}  {'dense anomalies':>15}  {'min eig (dense)':>16}"]
    for exponent, ud, errors, dense, low in report.totals():
        lines.append(f"  {exponent:>8g}  {ud:>12d}  {errors:>9d}  {dense:>15d}  {low:>16.3e}")
    return "\n".join(lines)
