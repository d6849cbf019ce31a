"""Chart metrics on 3-manifolds: metric, inverse, Christoffel symbols, Riemann tensor, sectional curvature.

Index conventions (all arrays are plain numpy):
    dg[m, i, j]        = d_m g_ij
    ddg[a, b, i, j]    = d_a d_b g_ij
    gamma[i, j, k]     = Gamma^i_jk
    R_up[i, j, k, l]   = R^i_jkl, with (R(X,Y)Z)^i = R^i_jkl Z^j X^k Y^l
    R_low[i, j, k, l]  = g_im R^m_jkl
so that <R(u,v)v, u> = R_low[i,j,k,l] u^i v^j u^k v^l and a space form of curvature K0 has
R_low = K0 (g_ik g_jl - g_il g_jk).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ChartDomainError, DegenerateMetricError, DegeneratePlaneError

MetricFn = Callable[[np.ndarray], np.ndarray]
DerivsFn = Callable[[np.ndarray], "tuple[np.ndarray, np.ndarray]"]

ANALYTIC = "analytic"
FINITE_DIFFERENCE = "finite-difference"

# Central-difference steps, scaled by max(1, |x_i|).
FD_STEP_GRADIENT = 1e-5
FD_STEP_HESSIAN = 1e-4


@dataclass(frozen=True)
class SpaceFormTag:
    K0: int

    def __post_init__(self) -> None:
        if self.K0 not in (-1, 0, 1):
            raise ValueError(f"K0 must be -1, 0 or 1, got {self.K0}")


@dataclass(frozen=True)
class ChartMetric:
    """A coordinate chart with its metric.

    derivs_fn, when given, returns the analytic (dg, ddg) pair; christoffel_mode
    decides whether it is used or replaced by central differences of metric_fn.
    domain_margin is positive inside the chart and <= 0 outside.
    """
    name: str
    metric_fn: MetricFn
    dim: int = 3
    christoffel_mode: str = ANALYTIC
    params: dict[str, float] = field(default_factory=dict)
    derivs_fn: DerivsFn | None = None
    domain_margin: Callable[[np.ndarray], float] | None = None
    space_form: SpaceFormTag | None = None

    def with_mode(self, mode: str) -> "ChartMetric":
        return ChartMetric(
            name=self.name,
            metric_fn=self.metric_fn,
            dim=self.dim,
            christoffel_mode=mode,
            params=dict(self.params),
            derivs_fn=self.derivs_fn,
            domain_margin=self.domain_margin,
            space_form=self.space_form,
        )


@dataclass(frozen=True)
class TangentVector:
    base: np.ndarray
    components: np.ndarray


def _as_point(x) -> np.ndarray:
    return np.asarray(x, dtype=float).reshape(-1)


def _components(v) -> np.ndarray:
    if isinstance(v, TangentVector):
        return np.asarray(v.components, dtype=float)
    return np.asarray(v, dtype=float)


def in_domain(chart: ChartMetric, x) -> bool:
    if chart.domain_margin is None:
        return True
    return chart.domain_margin(_as_point(x)) > 0.0


def _raw_metric(chart: ChartMetric, x: np.ndarray) -> np.ndarray:
    if not in_domain(chart, x):
        raise ChartDomainError(chart.name, f"at {np.array2string(x, precision=6)}")
    g = np.asarray(chart.metric_fn(x), dtype=float)
    return 0.5 * (g + g.T)


def metric_at(chart: ChartMetric, x) -> tuple[np.ndarray, np.ndarray]:
    """Return (g, g^-1) at x; raises DegenerateMetricError unless g is symmetric positive definite."""
    x = _as_point(x)
    if not in_domain(chart, x):
        raise ChartDomainError(chart.name, f"at {np.array2string(x, precision=6)}")
    g = np.asarray(chart.metric_fn(x), dtype=float)
    where = np.array2string(x, precision=6)
    if g.shape != (chart.dim, chart.dim) or not np.all(np.isfinite(g)):
        raise DegenerateMetricError(where)
    if np.max(np.abs(g - g.T)) > 1e-14 * max(1.0, float(np.max(np.abs(g)))):
        raise DegenerateMetricError(f"{where} (not symmetric)")
    g = 0.5 * (g + g.T)
    try:
        np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        raise DegenerateMetricError(where) from None
    ginv = np.linalg.inv(g)
    return g, 0.5 * (ginv + ginv.T)


def _steps(x: np.ndarray, base: float) -> np.ndarray:
    return base * np.maximum(1.0, np.abs(x))


def _fd_gradient(chart: ChartMetric, x: np.ndarray) -> np.ndarray:
    n = chart.dim
    h = _steps(x, FD_STEP_GRADIENT)
    dg = np.empty((n, n, n))
    for m in range(n):
        e = np.zeros(n)
        e[m] = h[m]
        dg[m] = (_raw_metric(chart, x + e) - _raw_metric(chart, x - e)) / (2.0 * h[m])
    return dg


def _fd_hessian(chart: ChartMetric, x: np.ndarray) -> np.ndarray:
    """Nested central differences; symmetric in the two derivative slots by construction."""
    n = chart.dim
    h = _steps(x, FD_STEP_HESSIAN)
    g0 = _raw_metric(chart, x)
    ddg = np.empty((n, n, n, n))
    for a in range(n):
        ea = np.zeros(n)
        ea[a] = h[a]
        ddg[a, a] = (_raw_metric(chart, x + ea) - 2.0 * g0 + _raw_metric(chart, x - ea)) / h[a] ** 2
        for b in range(a + 1, n):
            eb = np.zeros(n)
            eb[b] = h[b]
            cross = (
                _raw_metric(chart, x + ea + eb)
                - _raw_metric(chart, x + ea - eb)
                - _raw_metric(chart, x - ea + eb)
                + _raw_metric(chart, x - ea - eb)
            ) / (4.0 * h[a] * h[b])
            ddg[a, b] = cross
            ddg[b, a] = cross
    return ddg


def metric_derivatives(chart: ChartMetric, x, need_hessian: bool = True) -> tuple[np.ndarray, np.ndarray | None]:
    """(dg, ddg) at x, analytic or by central differences according to the chart's mode."""
    x = _as_point(x)
    if chart.christoffel_mode == ANALYTIC and chart.derivs_fn is not None:
        if not in_domain(chart, x):
            raise ChartDomainError(chart.name, f"at {np.array2string(x, precision=6)}")
        dg, ddg = chart.derivs_fn(x)
        return np.asarray(dg, dtype=float), np.asarray(ddg, dtype=float)
    dg = _fd_gradient(chart, x)
    return dg, (_fd_hessian(chart, x) if need_hessian else None)


def christoffel_from(ginv: np.ndarray, dg: np.ndarray) -> np.ndarray:
    lowered = 0.5 * (np.einsum("jlk->ljk", dg) + np.einsum("klj->ljk", dg) - dg)
    gamma = np.einsum("il,ljk->ijk", ginv, lowered)
    return 0.5 * (gamma + gamma.transpose(0, 2, 1))


def riemann_lowered_from(g: np.ndarray, gamma: np.ndarray, ddg: np.ndarray) -> np.ndarray:
    """R_ijkl from second derivatives of g plus the quadratic Christoffel term.

    Written this way the pair (anti)symmetries and the first Bianchi identity hold
    whatever the accuracy of ddg, as long as ddg is symmetric in both index pairs.
    """
    second = 0.5 * (
        np.einsum("jkil->ijkl", ddg)
        + np.einsum("iljk->ijkl", ddg)
        - np.einsum("jlik->ijkl", ddg)
        - np.einsum("ikjl->ijkl", ddg)
    )
    gamma_low = np.einsum("pn,nil->pil", g, gamma)
    quad = np.einsum("njk,nil->ijkl", gamma, gamma_low) - np.einsum("njl,nik->ijkl", gamma, gamma_low)
    return second + quad


def christoffel_at(chart: ChartMetric, x) -> np.ndarray:
    """Gamma^i_jk at x, symmetric in j, k."""
    x = _as_point(x)
    _, ginv = metric_at(chart, x)
    dg, _ = metric_derivatives(chart, x, need_hessian=False)
    return christoffel_from(ginv, dg)


def riemann_at(chart: ChartMetric, x) -> tuple[np.ndarray, np.ndarray]:
    """(R^i_jkl, R_ijkl) at x."""
    x = _as_point(x)
    g, ginv = metric_at(chart, x)
    dg, ddg = metric_derivatives(chart, x)
    gamma = christoffel_from(ginv, dg)
    low = riemann_lowered_from(g, gamma, ddg)
    return np.einsum("im,mjkl->ijkl", ginv, low), low


@dataclass(frozen=True)
class PointGeometry:
    """Everything the radial integrator needs at one point, computed in one pass."""
    g: np.ndarray
    ginv: np.ndarray
    gamma: np.ndarray
    riemann: np.ndarray | None


def geometry_at(chart: ChartMetric, x, with_riemann: bool = True) -> PointGeometry:
    x = _as_point(x)
    g, ginv = metric_at(chart, x)
    dg, ddg = metric_derivatives(chart, x, need_hessian=with_riemann)
    gamma = christoffel_from(ginv, dg)
    low = riemann_lowered_from(g, gamma, ddg) if with_riemann else None
    return PointGeometry(g=g, ginv=ginv, gamma=gamma, riemann=low)


def inner(chart: ChartMetric, x, u, v) -> float:
    g, _ = metric_at(chart, x)
    return float(_components(u) @ g @ _components(v))


def norm(chart: ChartMetric, x, u) -> float:
    return math.sqrt(max(inner(chart, x, u, u), 0.0))


def cross(chart: ChartMetric, x, u, v) -> np.ndarray:
    """Metric cross product (u x v)^i = g^il sqrt(det g) eps_ljk u^j v^k (right-handed in chart orientation)."""
    g, ginv = metric_at(chart, x)
    return ginv @ (math.sqrt(np.linalg.det(g)) * np.cross(_components(u), _components(v)))


def sectional_curvature(chart: ChartMetric, x, u, v) -> float:
    """K(u, v) = <R(u,v)v, u> / (|u|^2 |v|^2 - <u,v>^2)."""
    x = _as_point(x)
    u = _components(u)
    v = _components(v)
    g, _ = metric_at(chart, x)
    uu, vv, uv = u @ g @ u, v @ g @ v, u @ g @ v
    area2 = uu * vv - uv * uv
    if area2 < 1e-12:
        raise DegeneratePlaneError(float(area2))
    _, low = riemann_at(chart, x)
    return float(np.einsum("ijkl,i,j,k,l->", low, u, v, u, v) / area2)


# ── Built-in charts ──────────────────────────────────────────────────────────


def euclidean3() -> ChartMetric:
    zero3 = np.zeros((3, 3, 3))
    zero4 = np.zeros((3, 3, 3, 3))
    return ChartMetric(
        name="euclidean3",
        metric_fn=lambda x: np.eye(3),
        derivs_fn=lambda x: (zero3, zero4),
        space_form=SpaceFormTag(0),
    )


def euclidean3_cylindrical() -> ChartMetric:
    """(r, phi, z) with g = diag(1, r^2, 1), r > 0."""

    def metric(x: np.ndarray) -> np.ndarray:
        return np.diag([1.0, x[0] ** 2, 1.0])

    def derivs(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        dg = np.zeros((3, 3, 3))
        ddg = np.zeros((3, 3, 3, 3))
        dg[0, 1, 1] = 2.0 * x[0]
        ddg[0, 0, 1, 1] = 2.0
        return dg, ddg

    return ChartMetric(
        name="euclidean3_cylindrical",
        metric_fn=metric,
        derivs_fn=derivs,
        domain_margin=lambda x: float(x[0]),
        space_form=SpaceFormTag(0),
    )


def ellipsoid3_degenerate(a: float, b: float, name: str = "ellipsoid3_degenerate") -> ChartMetric:
    """Modified Hopf chart (eta, theta, phi) on x1^2/a^2 + x2^2/a^2 + x3^2/b^2 + x4^2/b^2 = 1.

    g = diag(a^2 cos^2 eta + b^2 sin^2 eta, a^2 sin^2 eta, b^2 cos^2 eta), eta in (0, pi/2).
    """
    if a <= 0 or b <= 0:
        raise ValueError(f"ellipsoid semi-axes must be positive, got a={a}, b={b}")
    a2, b2 = a * a, b * b

    def metric(x: np.ndarray) -> np.ndarray:
        s, c = math.sin(x[0]), math.cos(x[0])
        return np.diag([a2 * c * c + b2 * s * s, a2 * s * s, b2 * c * c])

    def derivs(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        s2, c2 = math.sin(2.0 * x[0]), math.cos(2.0 * x[0])
        dg = np.zeros((3, 3, 3))
        ddg = np.zeros((3, 3, 3, 3))
        dg[0] = np.diag([(b2 - a2) * s2, a2 * s2, -b2 * s2])
        ddg[0, 0] = np.diag([2.0 * (b2 - a2) * c2, 2.0 * a2 * c2, -2.0 * b2 * c2])
        return dg, ddg

    return ChartMetric(
        name=name,
        metric_fn=metric,
        params={"a": float(a), "b": float(b)},
        derivs_fn=derivs,
        domain_margin=lambda x: float(min(x[0], 0.5 * math.pi - x[0])),
        space_form=SpaceFormTag(1) if a == b == 1.0 else None,
    )


def sphere3_hopf() -> ChartMetric:
    """Unit S^3 in Hopf coordinates: g = diag(1, sin^2 eta, cos^2 eta)."""
    return ellipsoid3_degenerate(1.0, 1.0, name="sphere3_hopf")


def hyperbolic3_halfspace() -> ChartMetric:
    """Upper half-space (x, y, z > 0) with g = z^-2 I."""

    def metric(x: np.ndarray) -> np.ndarray:
        return np.eye(3) / x[2] ** 2

    def derivs(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        z = x[2]
        dg = np.zeros((3, 3, 3))
        ddg = np.zeros((3, 3, 3, 3))
        dg[2] = -2.0 * np.eye(3) / z ** 3
        ddg[2, 2] = 6.0 * np.eye(3) / z ** 4
        return dg, ddg

    return ChartMetric(
        name="hyperbolic3_halfspace",
        metric_fn=metric,
        derivs_fn=derivs,
        domain_margin=lambda x: float(x[2]),
        space_form=SpaceFormTag(-1),
    )


BUILTIN_CHARTS = ("euclidean3", "euclidean3_cylindrical", "sphere3_hopf", "hyperbolic3_halfspace", "ellipsoid3_degenerate")
