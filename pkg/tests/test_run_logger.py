"""JSONL run logs, pipeline status file and the run report."""
from __future__ import annotations

import json

import numpy as np

from scripts.report_runs import main as report_main
from src.run_logger import (
    PIPELINE_STATUS_FILE,
    default_log_dir,
    jsonable,
    log_run_end,
    log_run_start,
    log_stage_result,
    log_warning,
)
from src.run_report import get_run_report


def _lines(path):
    return [json.loads(ln) for ln in path.read_text().splitlines() if ln.strip()]


def test_default_log_dir_follows_env(tmp_path, monkeypatch):
    monkeypatch.setenv("TUBES_LOG_DIR", str(tmp_path / "elsewhere"))
    assert default_log_dir() == tmp_path / "elsewhere"


def test_jsonable_converts_numpy_and_tuples():
    out = jsonable({"a": np.float64(1.5), "b": (np.int64(2), 3), 4: [np.bool_(True)]})
    assert out == {"a": 1.5, "b": [2, 3], "4": [True]}
    json.dumps(out)


def test_run_events_and_status(tmp_path):
    logs = tmp_path / "logs"
    log_run_start("geodesic", "abc123", logs)
    log_stage_result("geodesic", True, {"energy_drift": np.float64(2e-12)}, log_dir=logs)
    log_stage_result("geodesic", False, error="step failure: boom", log_dir=logs)
    log_run_end("geodesic", 1, success=False, log_dir=logs)
    (runs,) = logs.glob("runs_*.jsonl")
    events = [e["event"] for e in _lines(runs)]
    assert events == ["run_start", "stage_result", "stage_result", "run_end"]
    status = json.loads((logs / PIPELINE_STATUS_FILE).read_text())
    assert status["stages"]["geodesic"]["success"] is False
    assert status["stages"]["geodesic"]["error"] == "step failure: boom"


def test_warnings_go_to_their_own_file(tmp_path):
    log_warning("mesh", "vertex near projection pole", tmp_path, min_pole_gap=1e-4)
    (warn,) = tmp_path.glob("warnings_*.jsonl")
    (entry,) = _lines(warn)
    assert entry["source"] == "mesh" and entry["min_pole_gap"] == 1e-4


def test_report_keeps_worst_metric_per_stage(tmp_path):
    for drift in (1e-12, 5e-10, 3e-11):
        log_stage_result("geodesic", True, {"energy_drift": drift, "length": 100.0}, log_dir=tmp_path)
    log_stage_result("poincare", False, error="seed infeasible", log_dir=tmp_path)
    report = get_run_report(tmp_path)
    rows = {r["stage"]: r for r in report["by_stage"]}
    assert rows["geodesic"]["runs"] == 3
    assert rows["geodesic"]["success_rate_pct"] == 100.0
    assert rows["geodesic"]["worst"] == {"energy_drift": 5e-10}
    assert rows["poincare"]["success_rate_pct"] == 0.0
    assert rows["poincare"]["last_error"] == "seed infeasible"


def test_report_script_prints_a_table(tmp_path, capsys):
    log_stage_result("mesh", True, {"sphere_norm_error": 1e-15}, log_dir=tmp_path)
    assert report_main(["--logs-dir", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "mesh" in out and "sphere_norm_error" in out
    assert report_main(["--logs-dir", str(tmp_path / "empty")]) == 0
    assert "No log files found." in capsys.readouterr().out
