"""Structured run logs: logs/runs_YYYY-MM-DD.jsonl, warnings_YYYY-MM-DD.jsonl and pipeline_status.json."""
from __future__ import annotations

import json
import os
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

PROJECT_ROOT = Path(__file__).resolve().parent.parent
PIPELINE_STATUS_FILE = "pipeline_status.json"


def default_log_dir() -> Path:
    """TUBES_LOG_DIR at call time, else <project>/logs."""
    env = os.environ.get("TUBES_LOG_DIR")
    return Path(env) if env else PROJECT_ROOT / "logs"


def _ensure_log_dir(log_dir: Path | None = None) -> Path:
    dir_ = log_dir or default_log_dir()
    dir_.mkdir(parents=True, exist_ok=True)
    return dir_


def _ts() -> str:
    return datetime.now(timezone.utc).isoformat()


def jsonable(value: Any) -> Any:
    """numpy scalars and tuples do not survive json.dumps as-is."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if hasattr(value, "item") and callable(value.item):
        try:
            return value.item()
        except (TypeError, ValueError):
            return str(value)
    return value


def _append(prefix: str, entry: dict[str, Any], log_dir: Path | None = None) -> None:
    dir_ = _ensure_log_dir(log_dir)
    date_str = datetime.now(timezone.utc).strftime("%Y-%m-%d")
    log_file = dir_ / f"{prefix}_{date_str}.jsonl"
    with open(log_file, "a", encoding="utf-8") as f:
        f.write(json.dumps(jsonable(entry), ensure_ascii=False) + "\n")
        f.flush()


def log_run_start(kind: str, config_digest: str, log_dir: Path | None = None) -> None:
    """Append run_start event to the daily run log."""
    _append("runs", {
        "timestamp": _ts(),
        "event": "run_start",
        "kind": kind,
        "config_digest": config_digest,
    }, log_dir)


def log_run_end(kind: str, stages: int, success: bool = True, log_dir: Path | None = None) -> None:
    _append("runs", {
        "timestamp": _ts(),
        "event": "run_end",
        "kind": kind,
        "stages": stages,
        "success": success,
    }, log_dir)


def _update_pipeline_status(
    stage: str,
    success: bool,
    metrics: dict[str, Any],
    error: str | None,
    log_dir: Path | None = None,
) -> None:
    """Last outcome per pipeline stage, for a quick look without scanning the JSONL files."""
    dir_ = _ensure_log_dir(log_dir)
    status_file = dir_ / PIPELINE_STATUS_FILE
    now = _ts()
    try:
        data: dict[str, Any] = {}
        if status_file.exists():
            try:
                with open(status_file, encoding="utf-8") as f:
                    data = json.load(f)
            except (json.JSONDecodeError, OSError):
                data = {}
        stages = data.get("stages") if isinstance(data.get("stages"), dict) else {}
        stages[stage] = {"last_run": now, "success": success, "metrics": jsonable(metrics), "error": error}
        data["stages"] = stages
        data["last_updated"] = now
        with open(status_file, "w", encoding="utf-8") as f:
            json.dump(data, f, indent=2, ensure_ascii=False)
            f.flush()
    except OSError:
        pass


def log_stage_result(
    stage: str,
    success: bool,
    metrics: dict[str, Any] | None = None,
    error: str | None = None,
    log_dir: Path | None = None,
) -> None:
    """One pipeline stage outcome: drifts, residuals, verdicts, or the error that stopped it."""
    metrics = metrics or {}
    _append("runs", {
        "timestamp": _ts(),
        "event": "stage_result",
        "stage": stage,
        "success": success,
        "metrics": metrics,
        "error": error,
    }, log_dir)
    _update_pipeline_status(stage, success, metrics, error, log_dir)


def log_warning(source: str, reason: str, log_dir: Path | None = None, **details: Any) -> None:
    _append("warnings", {
        "timestamp": _ts(),
        "source": source,
        "reason": reason,
        **details,
    }, log_dir)
