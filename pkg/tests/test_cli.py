from pathlib import Path

import pytest

from main import EXIT_INPUT, EXIT_NUMERICAL, EXIT_OK, main

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def test_validate_ok(capsys):
    assert main(["validate", str(SCENARIOS / "range_bearing.yaml")]) == EXIT_OK
    assert "model=range-bearing" in capsys.readouterr().out


def test_validate_bad_file(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("schema: udkf-scenario/1\nmodel: scalar\n")
    assert main(["validate", str(bad)]) == EXIT_INPUT


def test_run_twice_is_byte_identical(tmp_path):
    outputs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert main(["run", str(SCENARIOS / "scalar.yaml"), "--out", str(out)]) == EXIT_OK
        outputs.append(((out / "scalar.csv").read_bytes(), (out / "scalar.json").read_bytes()))
    assert outputs[0] == outputs[1]


def test_run_halting_scenario_exits_with_numerical_code(tmp_path):
    # bearing is singular at the origin: the Jacobian turns non-finite
    text = (SCENARIOS / "range_bearing.yaml").read_text()
    text = text.replace("x0: [100.0, 50.0, 1.0, -0.5]", "x0: [0.0, 0.0, 0.0, 0.0]")
    scenario = tmp_path / "origin.yaml"
    scenario.write_text(text)
    assert main(["run", str(scenario), "--out", str(tmp_path)]) == EXIT_NUMERICAL


def test_stress(tmp_path, capsys):
    out = tmp_path / "stress.csv"
    code = main(["stress", "--max-exp", "4", "--trials", "2", "--seed", "1", "--out", str(out)])
    assert code == EXIT_OK
    assert len(out.read_text().splitlines()) == 1 + 3 * 2
    assert "UD anomalies" in capsys.readouterr().out


def test_stress_rejects_out_of_range_exponent():
    assert main(["stress", "--max-exp", "20", "--trials", "1", "--seed", "1"]) == EXIT_INPUT


@pytest.mark.slow
def test_selftest_passes():
    assert main(["selftest"]) == EXIT_OK
