"""Experiment pipelines: frenet, tube-metric, geodesic, poincare, mesh, certify.

Each pipeline writes its artifacts (every header echoes the config), logs one stage_result per
stage and returns StageSummary records. Numerical failures propagate after being logged.
"""
from __future__ import annotations

import json
import math
import os
from pathlib import Path
from typing import Callable

import numpy as np
import pandas as pd

from .catalog import build_chart, build_curve, build_setup
from .config import ExperimentConfig
from .curves import (
    ArcLengthTable,
    ParamCurve,
    arclength_reparam,
    constancy_check,
    curvature_profile,
    curvature_scalars,
    frenet_evolve,
    frenet_residuals,
)
from .errors import ConfigError, ExportError, InsufficientPointsError, TubeToolkitError
from .export import (
    header_lines,
    project_mesh_s3,
    sample_tube_mesh,
    write_csv,
    write_obj,
    write_svg_scatter,
)
from .flow import geodesic_residual, integrate, unit_speed_seed
from .manifolds import ChartMetric
from .numeric_tubes import s_independence_certificate, sample_tube_grid, tube_metric_numeric
from .poincare import (
    SectionConfig,
    default_seed_grid,
    ellipse_tube_metric,
    momentum_drift,
    points_frame,
    regularity_score,
    section,
    separatrix_seeds,
)
from .run_logger import jsonable, log_run_end, log_run_start, log_stage_result, log_warning
from .schemas import StageSummary, summary_payload
from .spaceform_tubes import InducedMetric2D, TubeProfile, ellipsoid_curvatures, hopf_curvatures, tube_metric

PROJECT_ROOT = Path(__file__).resolve().parent.parent
DEGENERATE_AREA = 1e-14

Progress = Callable[[str], None]


class RunContext:
    """Where a run writes and logs, plus the header every artifact carries."""

    def __init__(
        self,
        config: ExperimentConfig,
        out_dir: Path | None = None,
        workers: int | None = None,
        log_dir: Path | None = None,
        progress: Progress | None = None,
    ) -> None:
        self.config = config
        self.out_dir = Path(out_dir) if out_dir else default_output_dir(config)
        self.workers = workers
        self.log_dir = log_dir
        self.progress = progress or (lambda _msg: None)
        self.prefix = config.get("output.prefix") or config.name
        self.header = header_lines(config.to_toml(), title=f"tubes {config.kind} run, config {config.digest}")

    def path(self, suffix: str) -> Path:
        return self.out_dir / f"{self.prefix}_{suffix}"

    def stage(self, name: str, metrics: dict, artifacts: list[Path]) -> StageSummary:
        log_stage_result(name, True, metrics, log_dir=self.log_dir)
        return StageSummary(name, True, metrics, [str(p) for p in artifacts])


def default_output_dir(config: ExperimentConfig) -> Path:
    """output.dir, else TUBES_OUTPUT_DIR, else <project>/output."""
    if config.get("output.dir"):
        return Path(config.get("output.dir"))
    env = os.environ.get("TUBES_OUTPUT_DIR")
    return Path(env) if env else PROJECT_ROOT / "output"


def _allow_geodesic(curve: ParamCurve) -> bool:
    return curve.reference_normal is not None


def closed_form_metric(
    chart: ChartMetric,
    curve: ParamCurve,
    profile: TubeProfile,
    table: ArcLengthTable | None = None,
) -> InducedMetric2D | None:
    """Space-form tube metric from the curve's curvature scalars; None when the chart is not a space form
    or the curvatures vary along an open curve."""
    if chart.space_form is None:
        return None
    table = table or arclength_reparam(curve)
    L = table.length
    s_period = L if curve.closed else None
    name = f"closed_form_tube[{chart.name}]"
    if constancy_check(curve, table=table).constant:
        k1, k2 = curvature_scalars(curve, 0.0, table)
        return tube_metric(chart.space_form, k1, k2, profile, s_period=s_period, s_range=(0.0, L), name=name)
    if not curve.closed:
        return None
    prof = curvature_profile(curve, table=table)
    return tube_metric(chart.space_form, prof.k1, prof.k2, profile, dk1=prof.k1.derivative(),
                       dk2=prof.k2.derivative(), s_period=L, name=name)


def _oracle_curvatures(config: ExperimentConfig) -> tuple[float, float] | None:
    c = config.section("curve")
    if c["kind"] == "hopf_curve":
        return hopf_curvatures(c["alpha"], c["beta"], c["eta0"])
    if c["kind"] == "ellipsoid_curve":
        return ellipsoid_curvatures(config.get("manifold.a"), config.get("manifold.b"), c["alpha"], c["beta"], c["eta0"])
    return None


def _s_samples(curve: ParamCurve, length: float, n: int) -> np.ndarray:
    return np.linspace(0.0, length, n, endpoint=not curve.closed)


# ── Pipelines ────────────────────────────────────────────────────────────────


def run_frenet(ctx: RunContext) -> list[StageSummary]:
    cfg = ctx.config
    chart = build_chart(cfg)
    curve = build_curve(cfg, chart)
    table = arclength_reparam(curve, cfg.get("curve.arc_samples"))
    allow = _allow_geodesic(curve)
    s = _s_samples(curve, table.length, cfg.get("grid.n_s"))
    ctx.progress(f"Frenet frame of {curve.name} at {len(s)} arc lengths (L = {table.length:.6g})")
    frames = frenet_evolve(curve, s, table, allow_geodesic=allow)
    k1 = np.array([f.k1 for f in frames])
    k2 = np.array([f.k2 for f in frames])
    h = 1e-4 * table.length
    check_points = s[(s > 2 * h) & (s < table.length - 2 * h)] if not curve.closed else s
    residual = 0.0
    if not allow:
        for si in check_points[:: max(1, len(check_points) // 8)]:
            residual = max(residual, max(frenet_residuals(curve, float(si), table, h)))
    metrics = {
        "length": table.length,
        "k1_mean": float(k1.mean()),
        "k2_mean": float(k2.mean()),
        "k1_deviation": float(np.ptp(k1)),
        "k2_deviation": float(np.ptp(k2)),
        "constant": bool(np.ptp(k1) < 1e-8 and np.ptp(k2) < 1e-8),
        "frenet_residual": residual,
    }
    oracle = _oracle_curvatures(cfg)
    if oracle is not None:
        metrics["k1_oracle_error"] = float(np.max(np.abs(np.abs(k1) - abs(oracle[0]))))
        metrics["k2_oracle_error"] = float(np.max(np.abs(np.abs(k2) - abs(oracle[1]))))
    csv = write_csv(pd.DataFrame([f.to_dict() for f in frames]), ctx.path("frenet.csv"), ctx.header)
    return [ctx.stage("frenet", metrics, [csv])]


def run_tube_metric(ctx: RunContext) -> list[StageSummary]:
    cfg = ctx.config
    chart, curve, profile = build_setup(cfg)
    table = arclength_reparam(curve, cfg.get("curve.arc_samples"))
    grid = (cfg.get("grid.n_s"), cfg.get("grid.n_psi"))
    ctx.progress(f"Sampling {grid[0]}x{grid[1]} tube metric on {chart.name} about {curve.name}")
    samples = sample_tube_grid(chart, curve, profile, grid, table, workers=ctx.workers)
    metric = tube_metric_numeric(chart, curve, profile, grid, table, samples=samples)
    det = samples["E"] * samples["G"] - samples["F"] ** 2
    metrics = {
        "grid": list(grid),
        "min_det": float(det.min()),
        "s_deviation": float(metric.info["s_deviation"]),
        "s_independent": bool(metric.s_independent),
    }
    closed = closed_form_metric(chart, curve, profile, table)
    if closed is not None:
        v = closed.at(samples["s"].to_numpy(), samples["psi"].to_numpy())
        samples = samples.assign(E_closed=v.E, F_closed=v.F, G_closed=v.G)
        metrics["closed_form_max_error"] = float(max(
            np.max(np.abs(samples["E"] - samples["E_closed"])),
            np.max(np.abs(samples["F"] - samples["F_closed"])),
            np.max(np.abs(samples["G"] - samples["G_closed"])),
        ))
    csv = write_csv(samples, ctx.path("metric.csv"), ctx.header)
    return [ctx.stage("tube-metric", metrics, [csv])]


def _flow_metric(ctx: RunContext) -> InducedMetric2D:
    cfg = ctx.config
    chart, curve, profile = build_setup(cfg)
    table = arclength_reparam(curve, cfg.get("curve.arc_samples"))
    if cfg.get("flow.metric") == "closed-form":
        metric = closed_form_metric(chart, curve, profile, table)
        if metric is None:
            raise ConfigError("flow.metric", f"no closed form on {chart.name} about {curve.name}; use 'numeric'")
        return metric
    grid = (cfg.get("grid.n_s"), cfg.get("grid.n_psi"))
    ctx.progress(f"Sampling {grid[0]}x{grid[1]} tube metric for the flow")
    return tube_metric_numeric(chart, curve, profile, grid, table, workers=ctx.workers)


def run_geodesic(ctx: RunContext) -> list[StageSummary]:
    cfg = ctx.config
    f = cfg.section("flow")
    metric = _flow_metric(ctx)
    max_step = f["max_step"] or math.inf
    seed = unit_speed_seed(metric, (f["s0"], f["psi0"]), f["angle"])
    ctx.progress(f"Integrating geodesic of length {f['length']:g} on {metric.name} (tol {f['tol']:g})")
    traj = integrate(metric, seed, f["length"], f["tol"], max_step, f["n_out"] or None)
    metrics = {
        **traj.diagnostics(),
        "s_independent": bool(metric.s_independent),
        "geodesic_residual": geodesic_residual(metric, traj),
    }
    stages = []
    csv = write_csv(traj.frame(), ctx.path("trajectory.csv"), ctx.header)
    stages.append(ctx.stage("geodesic", metrics, [csv]))
    if f["reverse_check"]:
        back = integrate(metric, traj.final.reversed(), f["length"], f["tol"], max_step)
        end = back.final
        rev = {"return_error_s": abs(end.s - seed.s), "return_error_psi": abs(end.psi - seed.psi),
               "return_error_p": max(abs(end.p_s + seed.p_s), abs(end.p_psi + seed.p_psi))}
        stages.append(ctx.stage("geodesic.reversibility", rev, []))
    return stages


def _section_seeds(cfg: ExperimentConfig, metric: InducedMetric2D) -> tuple[list[tuple[float, float]], list[str]]:
    sec = cfg.section("section")
    grid = sec["seed_grid"]
    if grid == "custom":
        seeds = [tuple(p) for p in sec["seeds"]]
        return seeds, ["custom"] * len(seeds)
    seeds: list[tuple[float, float]] = []
    labels: list[str] = []
    if grid in ("default", "both"):
        d = default_seed_grid(sec["psi0"], sec["momenta"] or None)
        seeds += d
        labels += ["grid"] * len(d)
    if grid in ("separatrix", "both"):
        sx = separatrix_seeds(metric, sec["separatrix_offsets"], sec["separatrix_momenta"])
        seeds += sx
        labels += ["separatrix"] * len(sx)
    return seeds, labels


def run_poincare(ctx: RunContext) -> list[StageSummary]:
    cfg = ctx.config
    sec = cfg.section("section")
    metric = ellipse_tube_metric(sec["a_semi"], sec["b_semi"], sec["rho0"])
    seeds, labels = _section_seeds(cfg, metric)
    sc = SectionConfig(
        section_period=metric.s_period,
        seeds=tuple(seeds),
        n_crossings=sec["n_crossings"],
        direction=sec["direction"],
        crossing_tol=sec["crossing_tol"],
        tol=sec["tol"],
    )
    ctx.progress(f"Section of {metric.name}: {len(seeds)} seeds x {sc.n_crossings} crossings (L = {metric.s_period:.6g})")
    run = section(metric, sc, workers=ctx.workers)
    frame = points_frame(run.points)
    drift = momentum_drift(run)
    rows = []
    by_seed = run.by_seed()
    for i, (seed, label) in enumerate(zip(seeds, labels)):
        pts = by_seed[i]
        row = {"seed_index": i, "kind": label, "psi0": seed[0], "p_psi0": seed[1], "p_s0": run.seed_p_s[i],
               "n_points": len(pts), "p_s_drift": drift[i], "residual": float("nan"),
               "classification": "", "mode": "", "error": run.errors.get(i, "")}
        try:
            if len(pts) < sec["min_points"]:
                raise InsufficientPointsError(i, len(pts), sec["min_points"])
            score = regularity_score(pts, sec["order"], sec["threshold"], min_points=sec["min_points"])[0]
            row.update(residual=score.residual, classification=score.classification, mode=score.mode)
        except InsufficientPointsError as e:
            row.update(classification="unscored", error=row["error"] or str(e))
        rows.append(row)
        ctx.progress(f"  [{i + 1}/{len(seeds)}] seed ({seed[0]:.4g}, {seed[1]:+.3g}) {label}: "
                     f"{len(pts)} points, {row['classification'] or 'failed'}")
    table = pd.DataFrame(rows)
    scored = table[table["classification"].isin(["regular", "irregular"])]
    artifacts = [write_csv(frame, ctx.path("section.csv"), ctx.header)]
    if cfg.get("output.svg"):
        artifacts.append(write_svg_scatter(frame, ctx.path("section.svg"), ctx.header, title=metric.name))
    artifacts.append(write_csv(table, ctx.path("regularity.csv"), ctx.header))
    metrics = {
        "seeds": len(seeds),
        "points": len(frame),
        "seed_errors": len(run.errors),
        "regular": int((scored["classification"] == "regular").sum()),
        "irregular": int((scored["classification"] == "irregular").sum()),
        "max_residual": float(scored["residual"].max()) if len(scored) else None,
        "max_p_s_drift": float(max(drift.values(), default=0.0)),
        "s_independent": bool(metric.s_independent),
    }
    return [ctx.stage("poincare", metrics, artifacts)]


def run_mesh(ctx: RunContext) -> list[StageSummary]:
    cfg = ctx.config
    chart, curve, profile = build_setup(cfg)
    table = arclength_reparam(curve, cfg.get("curve.arc_samples"))
    n_s, n_psi = cfg.get("grid.n_s"), cfg.get("grid.n_psi")
    ctx.progress(f"Meshing tube about {curve.name} on {chart.name}: {n_s}x{n_psi} radial geodesics")
    mesh = sample_tube_mesh(chart, curve, profile, n_s, n_psi, table, allow_geodesic=_allow_geodesic(curve),
                            workers=ctx.workers)
    project = cfg.get("output.project")
    if project == "auto":
        project = "s3" if chart.name == "sphere3_hopf" else "none"
    metrics: dict = {"vertices": len(mesh.vertices), "triangles": len(mesh.triangles())}
    if project == "s3":
        if chart.name != "sphere3_hopf":
            raise ConfigError("output.project", f"'s3' projection needs manifold.kind = 'sphere3_hopf', not {chart.name}")
        projected = project_mesh_s3(mesh)
        metrics["sphere_norm_error"] = float(np.max(np.abs(projected.norms - 1.0)))
        metrics["min_pole_gap"] = projected.min_pole_gap
        if projected.near_pole:
            log_warning("mesh", "vertex near projection pole", ctx.log_dir,
                        min_pole_gap=projected.min_pole_gap, config_digest=ctx.config.digest)
            ctx.progress(f"  warning: a vertex is within {projected.min_pole_gap:.2e} of the projection pole")
        mesh = projected.mesh
    areas = mesh.triangle_areas()
    metrics["min_triangle_area"] = float(areas.min()) if len(areas) else 0.0
    metrics["degenerate_faces"] = int((areas < DEGENERATE_AREA).sum())
    obj = write_obj(mesh, ctx.path("tube.obj"), ctx.header)
    return [ctx.stage("mesh", metrics, [obj])]


def run_certify(ctx: RunContext) -> list[StageSummary]:
    cfg = ctx.config
    c = cfg.section("certify")
    chart = build_chart(cfg)
    curve = build_curve(cfg, chart)
    table = arclength_reparam(curve, cfg.get("curve.arc_samples"))
    ctx.progress(f"Certifying s-independence of tubes about {curve.name} on {chart.name} up to rho = {c['rho0']:g}")
    report = s_independence_certificate(chart, curve, c["rho0"], c["samples"], c["tol"], c["n_psi"], c["n_rho"],
                                        table, ctx.workers)
    csv = write_csv(pd.DataFrame(report.samples), ctx.path("certificate.csv"), ctx.header)
    return [ctx.stage("certify", report.to_dict(), [csv])]


PIPELINES: dict[str, Callable[[RunContext], list[StageSummary]]] = {
    "frenet": run_frenet,
    "tube-metric": run_tube_metric,
    "geodesic": run_geodesic,
    "poincare": run_poincare,
    "mesh": run_mesh,
    "certify": run_certify,
}


def run_experiment(
    config: ExperimentConfig,
    out_dir: Path | None = None,
    workers: int | None = None,
    log_dir: Path | None = None,
    progress: Progress | None = None,
) -> dict:
    """Dispatch on config.kind, write artifacts and <prefix>_summary.json; returns the summary payload.

    A TubeToolkitError is logged as a failed stage and re-raised.
    """
    ctx = RunContext(config, out_dir, workers, log_dir, progress)
    log_run_start(config.kind, config.digest, log_dir)
    stages: list[StageSummary] = []
    try:
        stages = PIPELINES[config.kind](ctx)
    except TubeToolkitError as e:
        log_stage_result(config.kind, False, error=str(e), log_dir=log_dir)
        log_run_end(config.kind, len(stages), success=False, log_dir=log_dir)
        raise
    payload = summary_payload(config.kind, config.name, config.digest, stages)
    summary = ctx.path("summary.json")
    try:
        summary.parent.mkdir(parents=True, exist_ok=True)
        with open(summary, "w", encoding="utf-8") as fh:
            json.dump(jsonable(payload), fh, indent=2, ensure_ascii=False)
    except OSError as e:
        raise ExportError(summary, e.strerror or str(e)) from e
    payload["summary_path"] = str(summary)
    log_run_end(config.kind, len(stages), success=all(s.success for s in stages), log_dir=log_dir)
    return payload
