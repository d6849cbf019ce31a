"""Build the chart, curve and tube profile an ExperimentConfig names."""
from __future__ import annotations

from dataclasses import replace
from typing import NamedTuple

from .config import ExperimentConfig
from .curves import (
    ParamCurve,
    circle,
    ellipse,
    ellipsoid_curve,
    helix,
    helix_cylindrical,
    hopf_curve,
    straight_line,
    wavy_ellipsoid_curve,
)
from .errors import ConfigError
from .expressions import expression_curve, user_chart
from .manifolds import (
    ChartMetric,
    ellipsoid3_degenerate,
    euclidean3,
    euclidean3_cylindrical,
    hyperbolic3_halfspace,
    sphere3_hopf,
)
from .spaceform_tubes import TubeProfile, circular_profile, fourier_profile, lobed_profile


class Setup(NamedTuple):
    chart: ChartMetric
    curve: ParamCurve
    profile: TubeProfile


def build_chart(config: ExperimentConfig) -> ChartMetric:
    m = config.section("manifold")
    kind = m["kind"]
    if kind == "euclidean3":
        chart = euclidean3()
    elif kind == "euclidean3_cylindrical":
        chart = euclidean3_cylindrical()
    elif kind == "sphere3_hopf":
        chart = sphere3_hopf()
    elif kind == "hyperbolic3_halfspace":
        chart = hyperbolic3_halfspace()
    elif kind == "ellipsoid3_degenerate":
        chart = ellipsoid3_degenerate(m["a"], m["b"])
    else:
        chart = user_chart(m["components"], m["variables"], m["constants"])
    return chart.with_mode(m["christoffel_mode"])


def _catalog_curve(config: ExperimentConfig, chart: ChartMetric) -> ParamCurve:
    c = config.section("curve")
    m = config.section("manifold")
    kind = c["kind"]
    try:
        if kind == "circle":
            return circle(c["R"])
        if kind == "ellipse":
            return ellipse(c["a_semi"], c["b_semi"])
        if kind == "helix":
            return helix(c["radius"], c["pitch"], c["turns"])
        if kind == "helix_cylindrical":
            return helix_cylindrical(c["radius"], c["pitch"], c["turns"])
        if kind == "straight_line":
            return straight_line(c["direction"], c["origin"], c["length"])
        if kind == "hopf_curve":
            return hopf_curve(c["alpha"], c["beta"], c["eta0"])
        if kind == "ellipsoid_curve":
            return ellipsoid_curve(m["a"], m["b"], c["alpha"], c["beta"], c["eta0"])
        if kind == "wavy_ellipsoid_curve":
            return wavy_ellipsoid_curve(m["a"], m["b"], c["alpha"], c["beta"], c["eta0"], c["amp"])
    except ValueError as e:
        raise ConfigError(f"curve.{kind}", str(e)) from None
    return expression_curve(
        chart,
        c["position"],
        (c["t_range"][0], c["t_range"][1]),
        period=c["period"] or None,
        constants=m["constants"],
    )


def build_curve(config: ExperimentConfig, chart: ChartMetric | None = None) -> ParamCurve:
    """Catalog curve on the configured chart; a curve that lives on another chart is a config error."""
    chart = chart or build_chart(config)
    curve = _catalog_curve(config, chart)
    if curve.chart.name != chart.name:
        raise ConfigError(
            "curve.kind",
            f"{config.get('curve.kind')} lives on {curve.chart.name}, but manifold.kind is {config.get('manifold.kind')}",
        )
    return replace(curve, chart=chart)


def build_profile(config: ExperimentConfig) -> TubeProfile:
    p = config.section("profile")
    if p["kind"] == "circular":
        return circular_profile(p["rho0"])
    if p["kind"] == "lobed":
        return lobed_profile(p["rho0"], p["amplitude"], p["lobes"])
    if not (p["f_cos"] or p["f_sin"]) or not (p["g_cos"] or p["g_sin"]):
        raise ConfigError("profile.f_cos", "a fourier profile needs coefficients for both f and g")
    return fourier_profile(p["rho0"], p["f_cos"], p["f_sin"], p["g_cos"], p["g_sin"])


def build_setup(config: ExperimentConfig) -> Setup:
    chart = build_chart(config)
    return Setup(chart, build_curve(config, chart), build_profile(config))
