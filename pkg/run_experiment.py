#!/usr/bin/env python3
"""
Run one tube experiment and write its artifacts plus a summary.
Usage:
  python run_experiment.py poincare --config configs/torus_section.toml
  python run_experiment.py poincare --config configs/ellipse_section.toml --seed-grid both
  python run_experiment.py mesh --config configs/hopf_mesh.toml --out output/fig
  python run_experiment.py tube-metric --config configs/hopf_tube_metric.toml --grid 32 32
  python run_experiment.py geodesic --replay output/hopf_geodesic_trajectory.csv
  TUBES_CONCURRENCY=8 python run_experiment.py certify --config configs/ellipsoid_certify.toml
Exit codes: 0 success, 2 config error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from dotenv import load_dotenv

from src.config import KIND_ALIASES, KINDS, ExperimentConfig, load_config, parse_config
from src.errors import ConfigError, TubeToolkitError
from src.export import config_from_header
from src.pipelines import run_experiment

PROJECT_ROOT = Path(__file__).resolve().parent
LOAD_DOTENV = PROJECT_ROOT / ".env"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

SHOWN_METRICS = 6


def _format_metric(value) -> str:
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return f"{value:.3e}"
    return str(value)


def print_summary(payload: dict) -> None:
    stages = payload["stages"]
    w = max([5] + [len(s["stage"]) for s in stages])
    print(f"\n{'Stage':<{w}}  {'OK':<3}  Metrics")
    print("-" * 72)
    for s in stages:
        items = list(s["metrics"].items())
        shown = ", ".join(f"{k}={_format_metric(v)}" for k, v in items[:SHOWN_METRICS])
        more = f" (+{len(items) - SHOWN_METRICS} more)" if len(items) > SHOWN_METRICS else ""
        print(f"{s['stage']:<{w}}  {'yes' if s['success'] else 'no':<3}  {shown}{more}")
        for path in s["artifacts"]:
            print(f"{'':<{w}}       wrote {path}")
    print(f"\nSummary: {payload['summary_path']}")


def build_config(
    kind: str,
    config_path: Path | None,
    replay: Path | None,
    seed_grid: str | None,
    grid: tuple[int, int] | None,
    tol: float | None,
) -> ExperimentConfig:
    """Config file, artifact header or defaults; the subcommand and CLI flags override what they name."""
    if replay is not None:
        config = config_from_header(replay)
    elif config_path is not None:
        config = load_config(config_path)
    else:
        config = parse_config(f'[experiment]\nkind = "{kind}"\nname = "{kind}"\n', source="<defaults>")
    overrides: dict = {"experiment.kind": kind}
    if seed_grid is not None:
        overrides["section.seed_grid"] = seed_grid
    if grid is not None:
        overrides["grid.n_s"], overrides["grid.n_psi"] = grid
    if tol is not None:
        overrides["flow.tol"] = tol
        overrides["section.tol"] = tol
    return config.with_overrides(overrides)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="Tubes about curves: metrics, geodesic flow, sections, meshes")
    parser.add_argument("kind", choices=list(KINDS) + list(KIND_ALIASES), help="Pipeline to run")
    parser.add_argument("--config", type=Path, default=None, help="Experiment TOML file")
    parser.add_argument("--replay", type=Path, default=None, help="Re-run the config echoed in an artifact header")
    parser.add_argument("--out", type=Path, default=None, help="Artifact directory (default output.dir, TUBES_OUTPUT_DIR or output/)")
    parser.add_argument("--seed-grid", choices=["default", "separatrix", "both", "custom"], default=None,
                        help="Poincare seed set")
    parser.add_argument("--grid", type=int, nargs=2, metavar=("N", "M"), default=None, help="Grid size n_s n_psi")
    parser.add_argument("--tol", type=float, default=None, help="Flow integration tolerance")
    args = parser.parse_args(argv)

    load_dotenv(LOAD_DOTENV)
    kind = KIND_ALIASES.get(args.kind, args.kind)
    try:
        config = build_config(kind, args.config, args.replay, args.seed_grid,
                              tuple(args.grid) if args.grid else None, args.tol)
    except ConfigError as e:
        print(f"Config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except TubeToolkitError as e:
        print(f"Cannot read config: {e}", file=sys.stderr)
        return EXIT_CONFIG

    print(f"Running {config.kind} '{config.name}' (config {config.digest})", flush=True)
    try:
        payload = run_experiment(config, out_dir=args.out, progress=lambda msg: print(msg, flush=True))
    except ConfigError as e:
        print(f"Config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except TubeToolkitError as e:
        print(f"Failed: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    print_summary(payload)
    return EXIT_OK if payload["meta"]["ok"] else EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
