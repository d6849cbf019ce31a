"""Run report: aggregate runs_*.jsonl stage results by stage (success rate, worst drifts and residuals)."""
from __future__ import annotations

import json
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Any

from .run_logger import default_log_dir

# Metrics where the largest value seen across runs is the one worth reporting.
WORST_OF = (
    "energy_drift",
    "ps_drift",
    "geodesic_residual",
    "closed_form_max_error",
    "max_p_s_drift",
    "max_residual",
    "coordinate_deviation",
    "curvature_derivative",
    "sphere_norm_error",
    "frenet_residual",
    "k1_oracle_error",
    "k2_oracle_error",
)


def _read_stage_results(paths: list[Path]) -> dict[str, list[dict]]:
    by_stage: dict[str, list[dict]] = {}
    for path in paths:
        try:
            with open(path, encoding="utf-8") as f:
                for line in f:
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        entry = json.loads(line)
                    except json.JSONDecodeError:
                        continue
                    if entry.get("event") != "stage_result":
                        continue
                    by_stage.setdefault(entry.get("stage") or "unknown", []).append(entry)
        except OSError:
            continue
    return by_stage


def get_run_report(
    logs_dir: Path | None = None,
    file_paths: list[Path] | None = None,
    days: int | None = None,
) -> dict[str, Any]:
    """
    Read runs_*.jsonl logs and aggregate stage_result events by stage.
    Returns dict with log_files and by_stage (runs, successes, success rate, worst metrics, last error).
    """
    dir_ = logs_dir or default_log_dir()
    if file_paths is not None:
        paths = [Path(p) for p in file_paths if Path(p).exists()]
    else:
        paths = sorted(dir_.glob("runs_*.jsonl"))
        if days is not None and days > 0:
            cutoff = (datetime.now(timezone.utc) - timedelta(days=days)).strftime("%Y-%m-%d")
            paths = [p for p in paths if p.name >= f"runs_{cutoff}.jsonl"]
    paths = sorted(paths)

    by_stage = _read_stage_results(paths)
    rows = []
    for stage in sorted(by_stage):
        entries = by_stage[stage]
        n = len(entries)
        ok = sum(1 for e in entries if e.get("success"))
        worst: dict[str, float] = {}
        for e in entries:
            for key, value in (e.get("metrics") or {}).items():
                if key in WORST_OF and isinstance(value, (int, float)) and not isinstance(value, bool):
                    worst[key] = max(worst.get(key, float("-inf")), float(value))
        last_err = None
        for e in reversed(entries):
            if e.get("error"):
                last_err = (e["error"] or "")[:200]
                break
        rows.append({
            "stage": stage,
            "runs": n,
            "successes": ok,
            "success_rate_pct": round(ok / n * 100, 1) if n else 0.0,
            "worst": worst,
            "last_error": last_err,
        })

    return {
        "log_files": [str(p) for p in paths],
        "by_stage": rows,
    }
