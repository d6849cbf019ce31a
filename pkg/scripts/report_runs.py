#!/usr/bin/env python3
"""Print the run report (stage success rates, worst drifts and residuals) from JSONL logs."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from dotenv import load_dotenv

PROJECT_ROOT = Path(__file__).resolve().parent.parent
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from src.run_report import get_run_report


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="Run report from JSONL logs")
    parser.add_argument(
        "files",
        nargs="*",
        default=None,
        help="Paths to runs_YYYY-MM-DD.jsonl (default: logs/runs_*.jsonl)",
    )
    parser.add_argument("--logs-dir", type=Path, default=None, help="Logs directory when no files given (default: TUBES_LOG_DIR or logs/)")
    parser.add_argument("--days", type=int, default=None, help="Limit to last N days of log files (when no files given)")
    load_dotenv(PROJECT_ROOT / ".env")
    args = parser.parse_args(argv)

    file_paths = [Path(p) for p in args.files] if args.files else None
    report = get_run_report(logs_dir=args.logs_dir, file_paths=file_paths, days=args.days)

    paths = report["log_files"]
    rows = report["by_stage"]
    if not rows:
        print("No stage_result entries found." if paths else "No log files found.")
        return 0

    w_stage = max(5, max(len(r["stage"]) for r in rows))
    w_n = max(4, len(str(max(r["runs"] for r in rows))))
    print(f"\nRun report (from {len(paths)} log file(s))\n")
    header = f"{'Stage':<{w_stage}}  {'Runs':>{w_n}}  {'Success':>8}  Worst metrics / last error"
    print(header)
    print("-" * max(len(header), 70))
    for r in rows:
        worst = ", ".join(f"{k}={v:.2e}" for k, v in sorted(r["worst"].items())) or "-"
        print(f"{r['stage']:<{w_stage}}  {r['runs']:>{w_n}}  {r['success_rate_pct']:>7.1f}%  {worst}")
        if r["last_error"]:
            print(f"{'':<{w_stage}}  {'':>{w_n}}  {'':>8}  last error: {r['last_error']}")
    print()
    return 0


if __name__ == "__main__":
    sys.exit(main())
