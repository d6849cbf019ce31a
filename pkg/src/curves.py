"""Curves in a chart: arc length, covariant Frenet frame, curvature scalars k1 and k2."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline

from .errors import IrregularCurveError, VanishingCurvatureError
from .manifolds import (
    ChartMetric,
    cross,
    ellipsoid3_degenerate,
    euclidean3,
    euclidean3_cylindrical,
    geometry_at,
    metric_at,
    sphere3_hopf,
)

PointFn = Callable[[float], np.ndarray]

K1_MIN = 1e-8
MIN_SPEED = 1e-12
# Steps in t for the finite-difference fallbacks (acceleration, derivative of N).
ACC_STEP = 1e-5
NORMAL_STEP = 1e-3


@dataclass(frozen=True)
class ParamCurve:
    """A regular curve t -> chart point.

    acc_fn is optional; without it the coordinate acceleration is taken by central
    differences of vel_fn. period is set only for closed curves and is never inferred.
    reference_normal supplies N where k1 vanishes (straight lines used as tube axes).
    """
    chart: ChartMetric
    pos_fn: PointFn
    vel_fn: PointFn
    t_range: tuple[float, float]
    period: float | None = None
    acc_fn: PointFn | None = None
    name: str = "curve"
    params: dict[str, float] = field(default_factory=dict)
    reference_normal: PointFn | None = None

    @property
    def closed(self) -> bool:
        return self.period is not None

    def position(self, t: float) -> np.ndarray:
        return np.asarray(self.pos_fn(t), dtype=float)

    def velocity(self, t: float) -> np.ndarray:
        return np.asarray(self.vel_fn(t), dtype=float)

    def acceleration(self, t: float) -> np.ndarray:
        if self.acc_fn is not None:
            return np.asarray(self.acc_fn(t), dtype=float)
        h = ACC_STEP * max(1.0, abs(t))
        return (self.velocity(t + h) - self.velocity(t - h)) / (2.0 * h)


@dataclass(frozen=True)
class FrenetData:
    s: float
    t: float
    x: np.ndarray
    T: np.ndarray
    N: np.ndarray
    B: np.ndarray
    k1: float
    k2: float

    def to_dict(self) -> dict:
        row = {"s": self.s, "t": self.t, "k1": self.k1, "k2": self.k2}
        for label, vec in (("x", self.x), ("T", self.T), ("N", self.N), ("B", self.B)):
            for i, v in enumerate(vec):
                row[f"{label}{i}"] = float(v)
        return row


class ConstancyResult(NamedTuple):
    constant: bool
    max_dev_k1: float
    max_dev_k2: float


class FrenetResiduals(NamedTuple):
    dT: float
    dN: float
    dB: float


def speed(curve: ParamCurve, t: float) -> float:
    v = curve.velocity(t)
    g, _ = metric_at(curve.chart, curve.position(t))
    return math.sqrt(max(float(v @ g @ v), 0.0))


class ArcLengthTable:
    """Samples (t_i, s_i) with exact s(t) by quadrature and a Newton-refined inverse t(s)."""

    def __init__(self, curve: ParamCurve, t: np.ndarray, s: np.ndarray) -> None:
        self.curve = curve
        self.t = t
        self.s = s
        self.length = float(s[-1])
        self._guess = CubicSpline(s, t)

    def s_of_t(self, t: float) -> float:
        t0, t1 = self.t[0], self.t[-1]
        turns = 0.0
        if self.curve.closed:
            turns = math.floor((t - t0) / (t1 - t0))
            t = t - turns * (t1 - t0)
        i = int(np.clip(np.searchsorted(self.t, t) - 1, 0, len(self.t) - 2))
        part, _ = quad(lambda u: speed(self.curve, u), self.t[i], t, epsabs=0.0, epsrel=1e-13, limit=200)
        return float(turns * self.length + self.s[i] + part)

    def t_of_s(self, s: float) -> float:
        turns = 0.0
        if self.curve.closed:
            turns = math.floor(s / self.length)
            s = s - turns * self.length
        t = float(self._guess(s))
        for _ in range(8):
            err = self.s_of_t(t) - s
            if abs(err) < 1e-13 * max(1.0, self.length):
                break
            t -= err / speed(self.curve, t)
        return float(t + turns * (self.t[-1] - self.t[0]))


def arclength_reparam(curve: ParamCurve, n_samples: int = 256) -> ArcLengthTable:
    if n_samples < 16:
        raise ValueError(f"n_samples must be >= 16, got {n_samples}")
    t = np.linspace(curve.t_range[0], curve.t_range[1], n_samples + 1)
    for ti in t:
        sp_ = speed(curve, ti)
        if sp_ < MIN_SPEED:
            raise IrregularCurveError(float(ti), sp_)
    pieces = [
        quad(lambda u: speed(curve, u), a, b, epsabs=0.0, epsrel=1e-13, limit=200)[0]
        for a, b in zip(t[:-1], t[1:])
    ]
    s = np.concatenate([[0.0], np.cumsum(pieces)])
    if np.any(np.diff(s) <= 0.0):
        raise IrregularCurveError(float(t[int(np.argmin(np.diff(s)))]), 0.0)
    return ArcLengthTable(curve, t, s)


def _unit_normal(curve: ParamCurve, t: float, k1_min: float, allow_geodesic: bool, s: float):
    """(x, sigma, T, DT/ds, k1, N, gamma) at parameter t."""
    x = curve.position(t)
    v = curve.velocity(t)
    geom = geometry_at(curve.chart, x, with_riemann=False)
    g = geom.g
    sigma = math.sqrt(max(float(v @ g @ v), 0.0))
    if sigma < MIN_SPEED:
        raise IrregularCurveError(t, sigma)
    T = v / sigma
    acc = curve.acceleration(t) + np.einsum("ijk,j,k->i", geom.gamma, v, v)
    dT = (acc - float(acc @ g @ T) * T) / sigma ** 2
    k1 = math.sqrt(max(float(dT @ g @ dT), 0.0))
    if k1 < k1_min:
        if not (allow_geodesic and curve.reference_normal is not None):
            raise VanishingCurvatureError(s, k1)
        ref = np.asarray(curve.reference_normal(t), dtype=float)
        ref = ref - float(ref @ g @ T) * T
        N = ref / math.sqrt(float(ref @ g @ ref))
        return x, sigma, T, dT, 0.0, N, geom.gamma
    return x, sigma, T, dT, k1, dT / k1, geom.gamma


def frame_at_t(
    curve: ParamCurve,
    t: float,
    s: float = float("nan"),
    k1_min: float = K1_MIN,
    allow_geodesic: bool = False,
) -> FrenetData:
    x, sigma, T, _, k1, N, gamma = _unit_normal(curve, t, k1_min, allow_geodesic, s)
    B = cross(curve.chart, x, T, N)
    if k1 == 0.0:
        k2 = 0.0
    else:
        h = NORMAL_STEP
        n = [_unit_normal(curve, t + j * h, k1_min, allow_geodesic, s)[5] for j in (-2, -1, 1, 2)]
        dN_dt = (n[0] - 8.0 * n[1] + 8.0 * n[2] - n[3]) / (12.0 * h)
        DN = dN_dt / sigma + np.einsum("ijk,j,k->i", gamma, T, N)
        g, _ = metric_at(curve.chart, x)
        k2 = float(DN @ g @ B)
    return FrenetData(s=float(s), t=float(t), x=x, T=T, N=N, B=B, k1=float(k1), k2=k2)


def frenet_evolve(
    curve: ParamCurve,
    s_values,
    table: ArcLengthTable | None = None,
    k1_min: float = K1_MIN,
    allow_geodesic: bool = False,
) -> list[FrenetData]:
    """Frenet frame and curvature scalars at each arc length in s_values."""
    table = table or arclength_reparam(curve)
    return [
        frame_at_t(curve, table.t_of_s(float(s)), float(s), k1_min, allow_geodesic)
        for s in s_values
    ]


def curvature_scalars(
    curve: ParamCurve,
    s: float,
    table: ArcLengthTable | None = None,
    k1_min: float = K1_MIN,
) -> tuple[float, float]:
    fd = frenet_evolve(curve, [s], table, k1_min)[0]
    return fd.k1, fd.k2


def _sample_s(table: ArcLengthTable, n_samples: int) -> np.ndarray:
    if table.curve.closed:
        return np.linspace(0.0, table.length, n_samples, endpoint=False)
    return np.linspace(0.0, table.length, n_samples)


def constancy_check(
    curve: ParamCurve,
    n_samples: int = 64,
    tol: float = 1e-8,
    table: ArcLengthTable | None = None,
) -> ConstancyResult:
    table = table or arclength_reparam(curve)
    frames = frenet_evolve(curve, _sample_s(table, n_samples), table)
    k1 = np.array([f.k1 for f in frames])
    k2 = np.array([f.k2 for f in frames])
    d1 = float(np.max(np.abs(k1 - k1[0])))
    d2 = float(np.max(np.abs(k2 - k2[0])))
    return ConstancyResult(d1 < tol and d2 < tol, d1, d2)


def frenet_residuals(
    curve: ParamCurve,
    s: float,
    table: ArcLengthTable | None = None,
    h: float = 1e-4,
) -> FrenetResiduals:
    """Norms of DT/ds - k1 N, DN/ds + k1 T - k2 B and DB/ds + k2 N, by central differences in s."""
    table = table or arclength_reparam(curve)
    lo, mid, hi = frenet_evolve(curve, [s - h, s, s + h], table)
    geom = geometry_at(curve.chart, mid.x, with_riemann=False)

    def covariant(a: np.ndarray, b: np.ndarray, vec: np.ndarray) -> np.ndarray:
        return (b - a) / (2.0 * h) + np.einsum("ijk,j,k->i", geom.gamma, mid.T, vec)

    def g_norm(v: np.ndarray) -> float:
        return math.sqrt(max(float(v @ geom.g @ v), 0.0))

    r_T = covariant(lo.T, hi.T, mid.T) - mid.k1 * mid.N
    r_N = covariant(lo.N, hi.N, mid.N) + mid.k1 * mid.T - mid.k2 * mid.B
    r_B = covariant(lo.B, hi.B, mid.B) + mid.k2 * mid.N
    return FrenetResiduals(g_norm(r_T), g_norm(r_N), g_norm(r_B))


class CurvatureProfile(NamedTuple):
    """Periodic splines of k1(s), k2(s) over one period of a closed curve."""
    length: float
    k1: CubicSpline
    k2: CubicSpline


def curvature_profile(curve: ParamCurve, n: int = 256, table: ArcLengthTable | None = None) -> CurvatureProfile:
    if not curve.closed:
        raise ValueError(f"curvature_profile needs a closed curve, {curve.name} has no period")
    table = table or arclength_reparam(curve)
    s = np.linspace(0.0, table.length, n + 1)
    frames = frenet_evolve(curve, s[:-1], table)
    k1 = np.array([f.k1 for f in frames] + [frames[0].k1])
    k2 = np.array([f.k2 for f in frames] + [frames[0].k2])
    return CurvatureProfile(
        table.length,
        CubicSpline(s, k1, bc_type="periodic"),
        CubicSpline(s, k2, bc_type="periodic"),
    )


# ── Catalog ──────────────────────────────────────────────────────────────────


def circle(R: float) -> ParamCurve:
    return ellipse(R, R, name="circle")


def ellipse(a_semi: float, b_semi: float, name: str = "ellipse") -> ParamCurve:
    if a_semi <= 0 or b_semi <= 0:
        raise ValueError(f"semi-axes must be positive, got ({a_semi}, {b_semi})")
    return ParamCurve(
        chart=euclidean3(),
        pos_fn=lambda t: np.array([a_semi * math.cos(t), b_semi * math.sin(t), 0.0]),
        vel_fn=lambda t: np.array([-a_semi * math.sin(t), b_semi * math.cos(t), 0.0]),
        acc_fn=lambda t: np.array([-a_semi * math.cos(t), -b_semi * math.sin(t), 0.0]),
        t_range=(0.0, 2.0 * math.pi),
        period=2.0 * math.pi,
        name=name,
        params={"a_semi": float(a_semi), "b_semi": float(b_semi)},
    )


def helix(a: float, c: float, turns: float = 2.0) -> ParamCurve:
    return ParamCurve(
        chart=euclidean3(),
        pos_fn=lambda t: np.array([a * math.cos(t), a * math.sin(t), c * t]),
        vel_fn=lambda t: np.array([-a * math.sin(t), a * math.cos(t), c]),
        acc_fn=lambda t: np.array([-a * math.cos(t), -a * math.sin(t), 0.0]),
        t_range=(0.0, 2.0 * math.pi * turns),
        name="helix",
        params={"a": float(a), "c": float(c)},
    )


def helix_cylindrical(a: float, c: float, turns: float = 2.0) -> ParamCurve:
    """The helix in (r, phi, z) coordinates."""
    return ParamCurve(
        chart=euclidean3_cylindrical(),
        pos_fn=lambda t: np.array([a, t, c * t]),
        vel_fn=lambda t: np.array([0.0, 1.0, c]),
        acc_fn=lambda t: np.zeros(3),
        t_range=(0.0, 2.0 * math.pi * turns),
        name="helix_cylindrical",
        params={"a": float(a), "c": float(c)},
    )


def straight_line(direction=(0.0, 0.0, 1.0), origin=(0.0, 0.0, 0.0), length: float = 1.0) -> ParamCurve:
    """Segment in R^3; its normal comes from a fixed reference vector since k1 = 0."""
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    o = np.asarray(origin, dtype=float)
    ref = np.eye(3)[int(np.argmin(np.abs(d)))]
    return ParamCurve(
        chart=euclidean3(),
        pos_fn=lambda t: o + t * d,
        vel_fn=lambda t: d.copy(),
        acc_fn=lambda t: np.zeros(3),
        t_range=(0.0, float(length)),
        name="straight_line",
        params={"length": float(length)},
        reference_normal=lambda t: ref,
    )


def _knot_period(alpha: float, beta: float) -> float | None:
    return 2.0 * math.pi if float(alpha).is_integer() and float(beta).is_integer() else None


def _torus_knot(chart: ChartMetric, alpha: float, beta: float, eta0: float, name: str, params: dict) -> ParamCurve:
    if not 0.0 < eta0 < 0.5 * math.pi:
        raise ValueError(f"eta0 must lie in (0, pi/2), got {eta0}")
    return ParamCurve(
        chart=chart,
        pos_fn=lambda t: np.array([eta0, alpha * t, beta * t]),
        vel_fn=lambda t: np.array([0.0, alpha, beta]),
        acc_fn=lambda t: np.zeros(3),
        t_range=(0.0, 2.0 * math.pi),
        period=_knot_period(alpha, beta),
        name=name,
        params=params,
    )


def hopf_curve(alpha: float, beta: float, eta0: float) -> ParamCurve:
    """(eta0, alpha t, beta t) on the Clifford torus of S^3; closed for integer alpha, beta."""
    return _torus_knot(sphere3_hopf(), alpha, beta, eta0, "hopf_curve",
                       {"alpha": float(alpha), "beta": float(beta), "eta0": float(eta0)})


def ellipsoid_curve(a: float, b: float, alpha: float, beta: float, eta0: float) -> ParamCurve:
    return _torus_knot(ellipsoid3_degenerate(a, b), alpha, beta, eta0, "ellipsoid_curve",
                       {"a": float(a), "b": float(b), "alpha": float(alpha), "beta": float(beta), "eta0": float(eta0)})


def wavy_ellipsoid_curve(a: float, b: float, alpha: float, beta: float, eta0: float, amp: float = 0.2) -> ParamCurve:
    """eta = eta0 + amp sin t: leaves the torus eta = const, so its tube metric depends on s."""
    if not (0.0 < eta0 - abs(amp) and eta0 + abs(amp) < 0.5 * math.pi):
        raise ValueError(f"eta0 +- amp must stay in (0, pi/2), got eta0={eta0}, amp={amp}")
    return ParamCurve(
        chart=ellipsoid3_degenerate(a, b),
        pos_fn=lambda t: np.array([eta0 + amp * math.sin(t), alpha * t, beta * t]),
        vel_fn=lambda t: np.array([amp * math.cos(t), alpha, beta]),
        acc_fn=lambda t: np.array([-amp * math.sin(t), 0.0, 0.0]),
        t_range=(0.0, 2.0 * math.pi),
        period=_knot_period(alpha, beta),
        name="wavy_ellipsoid_curve",
        params={"a": float(a), "b": float(b), "alpha": float(alpha), "beta": float(beta),
                "eta0": float(eta0), "amp": float(amp)},
    )


CURVE_BUILDERS: dict[str, Callable[..., ParamCurve]] = {
    "circle": circle,
    "ellipse": ellipse,
    "helix": helix,
    "straight_line": straight_line,
    "hopf_curve": hopf_curve,
    "ellipsoid_curve": ellipsoid_curve,
    "wavy_ellipsoid_curve": wavy_ellipsoid_curve,
}
