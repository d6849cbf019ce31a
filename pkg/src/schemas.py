"""Run summary records written to <prefix>_summary.json next to the artifacts."""
from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone
import json
from typing import Any


@dataclass
class StageSummary:
    stage: str
    success: bool
    metrics: dict[str, Any] = field(default_factory=dict)
    artifacts: list[str] = field(default_factory=list)
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "success": self.success,
            "metrics": self.metrics,
            "artifacts": self.artifacts,
            "error": self.error,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False)


def make_timestamp() -> str:
    """Current UTC time in ISO format."""
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def summary_payload(kind: str, name: str, config_digest: str, stages: list[StageSummary]) -> dict:
    """Stage records plus meta (kind, name, digest, count, timestamp)."""
    return {
        "stages": [s.to_dict() for s in stages],
        "meta": {
            "kind": kind,
            "name": name,
            "config_digest": config_digest,
            "count": len(stages),
            "ok": all(s.success for s in stages),
            "timestamp": make_timestamp(),
        },
    }
