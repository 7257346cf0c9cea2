import csv
from pathlib import Path

import numpy as np
import pytest

from cli.noise import NoiseSource
from cli.report import format_summary, summary_json, trajectory_header, write_summary_json, write_trajectory_csv
from cli.runner import build_models, run_scenario, simulate
from cli.scenario import parse_scenario, parse_scenario_text
from version import SCHEMA_VERSION

from . import TOL_FILTER

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


@pytest.fixture
def scalar_cfg():
    return parse_scenario(SCENARIOS / "scalar.yaml")


def test_scalar_run_is_byte_identical(tmp_path, scalar_cfg):
    blobs = []
    for k in range(2):
        report = run_scenario(scalar_cfg)
        csv_path = write_trajectory_csv(report, tmp_path / f"run{k}.csv")
        json_path = write_summary_json(report, tmp_path / f"run{k}.json")
        blobs.append((csv_path.read_bytes(), json_path.read_bytes()))
    assert blobs[0] == blobs[1]


def test_record_count_and_schema(tmp_path, scalar_cfg):
    report = run_scenario(scalar_cfg)
    assert len(report.records) == scalar_cfg.steps + 1
    assert [rec.epoch for rec in report.records] == list(range(scalar_cfg.steps + 1))
    path = write_trajectory_csv(report, tmp_path / "out.csv")
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["schema", "epoch", "x0", "d0", "psd_flag"]
    assert len(rows) == scalar_cfg.steps + 2
    assert all(row[0] == SCHEMA_VERSION for row in rows[1:])
    assert report.summary["schema"] == SCHEMA_VERSION
    assert report.summary["records"] == scalar_cfg.steps + 1


@pytest.mark.parametrize("name", ["constant_velocity", "custom_linear", "range_bearing"])
def test_both_mode_matches_oracle(name):
    cfg = parse_scenario(SCENARIOS / f"{name}.yaml")
    report = run_scenario(cfg)
    assert report.ok
    assert report.summary["max_state_divergence"] <= TOL_FILTER
    assert report.summary["max_covariance_divergence"] <= TOL_FILTER
    assert report.summary["negative_d_events"] == 0
    assert all(rec.psd for rec in report.records)
    assert "state_divergence" in trajectory_header(report)


def test_dense_mode_reports_covariance_diagonal(scalar_cfg):
    scalar_cfg.mode = "dense"
    report = run_scenario(scalar_cfg)
    assert trajectory_header(report) == ["schema", "epoch", "x0", "pdiag0", "psd_flag"]
    assert "dense_min_eigenvalue" in report.summary
    assert "max_state_divergence" not in report.summary


def test_measure_every(scalar_cfg):
    scalar_cfg.measure_every = 2
    report = run_scenario(scalar_cfg)
    measured = [rec.epoch for rec in report.records if rec.innovations]
    assert measured == list(range(2, scalar_cfg.steps + 1, 2))


def test_simulation_uses_seeded_noise(scalar_cfg):
    process, meas = build_models(scalar_cfg)
    truth_a, steps_a = simulate(scalar_cfg, process, meas)
    truth_b, steps_b = simulate(scalar_cfg, process, meas)
    assert len(truth_a) == scalar_cfg.steps + 1
    np.testing.assert_array_equal(np.array(truth_a), np.array(truth_b))
    assert all(np.array_equal(a[1], b[1]) for a, b in zip(steps_a, steps_b))

    # first epoch: process noise first, then measurement noise
    noise = NoiseSource(scalar_cfg.seed)
    w = noise.gaussian(scalar_cfg.q_cov)
    v = noise.gaussian(scalar_cfg.r_cov)
    x1 = scalar_cfg.a * scalar_cfg.x0 + w
    np.testing.assert_allclose(truth_a[1], x1)
    np.testing.assert_allclose(steps_a[0][1], x1 + v)


def test_summary_text(scalar_cfg):
    report = run_scenario(scalar_cfg)
    text = format_summary(report)
    assert "negative-D events : 0" in text
    assert SCHEMA_VERSION in summary_json(report)
    assert '"wall_time"' not in summary_json(report)


@pytest.mark.parametrize("seed", [1, 2, 3, 4, 5])
def test_range_bearing_innovations_fall_in_the_gate(seed):
    cfg = parse_scenario(SCENARIOS / "range_bearing.yaml")
    cfg.steps, cfg.measure_every, cfg.seed = 100, 1, seed
    report = run_scenario(cfg)
    assert report.ok
    assert report.summary["innovation_count"] == 200
    assert 0.85 <= report.summary["innovation_gate_fraction"] <= 1.0


def test_noise_free_custom_linear_runs_both_filters():
    cfg = parse_scenario_text("""\
schema: udkf-scenario/1
model: custom-linear
dims: {n: 2, q: 0, m: 1}
steps: 30
seed: 3
mode: both
x0: [0.0, 1.0]
P0: [1.0, 0.5]
F: |
  1.0 1.0
  0.0 1.0
H: [[1.0, 0.0]]
R: [0.1]
""")
    report = run_scenario(cfg)
    assert report.ok
    assert report.summary["negative_d_events"] == 0
    assert report.summary["max_state_divergence"] <= TOL_FILTER
