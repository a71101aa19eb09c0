import json
import subprocess
import sys

import pytest

from tpace.cli import main
from tpace.io import DATASET_COLUMNS, write_dataset_csv
from tpace.simulate import simulate_trial

from conftest import small_config

HEADER = ",".join(DATASET_COLUMNS)


@pytest.fixture
def data_csv(tmp_path):
    return write_dataset_csv(simulate_trial(small_config(4)), tmp_path / "t.csv")


def test_analyze_effect1(data_csv, tmp_path, capsys):
    out = tmp_path / "r"
    assert main(["analyze", "--data", str(data_csv), "--effect", "1", "--seed", "7", "--out", str(out)]) == 0
    assert {p.name for p in out.iterdir()} == {"report.json", "curve.csv", "summary.csv"}
    assert "lambda_a" in capsys.readouterr().out


def test_analyze_effect2_with_options(data_csv, tmp_path):
    out = tmp_path / "r2"
    argv = ["analyze", "--data", str(data_csv), "--effect", "2", "--seed", "3", "--replicates", "4",
            "--criteria", "a,c", "--lambda-min", "0.1", "--lambda-step", "0.1", "--tol", "0.01", "--out", str(out)]
    assert main(argv) == 0
    doc = json.loads((out / "report.json").read_text())
    assert doc["config"]["replicates_used"] == 4
    assert doc["config"]["search"] == {"lambda_min": 0.1, "lambda_max": 1.0, "step": 0.1, "tol": 0.01}
    assert set(doc["tipping_points"]) == {"a", "c"}


def test_usage_errors(data_csv, tmp_path, capsys):
    out = str(tmp_path / "r")
    assert main(["analyze", "--data", str(data_csv), "--effect", "3", "--out", out]) == 1
    assert main(["analyze", "--data", str(tmp_path / "missing.csv"), "--effect", "1", "--out", out]) == 1
    assert main(["analyze", "--data", str(data_csv), "--effect", "1", "--criteria", "a,x", "--out", out]) == 1
    assert main(["frobnicate"]) == 1
    assert main([]) == 1
    # effect 2 draws random numbers, so a seed is mandatory
    assert main(["analyze", "--data", str(data_csv), "--effect", "2", "--out", out]) == 1
    assert "--seed is required" in capsys.readouterr().err
    assert main(["analyze", "--data", str(data_csv), "--effect", "1", "--lambda-min", "5",
                 "--lambda-max", "2", "--out", out]) == 1


def test_effect1_cutoff_runs_without_seed(data_csv, tmp_path):
    assert main(["analyze", "--data", str(data_csv), "--effect", "1", "--out", str(tmp_path / "r")]) == 0


def test_zero_events_exit_2(tmp_path, capsys):
    p = tmp_path / "z.csv"
    p.write_text(HEADER + "\nS1,E,,5,0,5\nS2,C,,6,0,6\nS3,C,2,6,0,6\n")
    assert main(["analyze", "--data", str(p), "--effect", "1", "--seed", "1", "--out", str(tmp_path / "r")]) == 2
    assert "degenerate: no events" in capsys.readouterr().err


def test_invalid_dataset_exit_2(tmp_path, capsys):
    p = tmp_path / "bad.csv"
    p.write_text(HEADER + "\nS1,E,11,10,1,24\nS2,C,,5,1,24\n")
    assert main(["validate", "--data", str(p)]) == 2
    assert "row 2" in capsys.readouterr().err


def test_numerical_failure_exit_3(data_csv, tmp_path, capsys):
    argv = ["analyze", "--data", str(data_csv), "--effect", "1", "--criteria", "c",
            "--lambda-max", "1.2", "--out", str(tmp_path / "r")]
    assert main(argv) == 3
    assert "outside search range" in capsys.readouterr().err


def test_validate_ok(data_csv, capsys):
    assert main(["validate", "--data", str(data_csv)]) == 0
    assert capsys.readouterr().out.startswith("ok: 200 subjects")


def test_simulate_from_config_and_preset(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(small_config(0).to_dict()))
    out = tmp_path / "sim.csv"
    assert main(["simulate", "--config", str(cfg), "--seed", "4", "--out", str(out)]) == 0
    assert out.read_text() == write_dataset_csv(simulate_trial(small_config(4)), tmp_path / "ref.csv").read_text()
    assert main(["simulate", "--preset", "brocade", "--seed", "1", "--out", str(tmp_path / "b.csv")]) == 0
    assert main(["validate", "--data", str(tmp_path / "b.csv")]) == 0


def test_simulate_bad_config(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{"n_experimental": 10}')
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "x.csv")]) == 1
    cfg.write_text('{"n_experimental": 10, "n_control": 0, "hazard_control_phase_a": 0.1}')
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "x.csv")]) == 1
    cfg.write_text("not json")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "x.csv")]) == 1


def test_module_entry_point(data_csv):
    proc = subprocess.run([sys.executable, "-m", "tpace", "validate", "--data", str(data_csv)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("ok:")
