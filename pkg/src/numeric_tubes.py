"""Tubes on general 3-manifolds: radial geodesics with parallel frame and Jacobi fields, sampled metrics.

State layout along a radial geodesic (27 reals):
    0:3 x, 3:6 xdot, 6:15 frame rows (T~, N~, B~),
    15:21 Jacobi components (t_s, n_s, b_s, t_psi, n_psi, b_psi), 21:27 their rho-derivatives.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import pandas as pd
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline, RectBivariateSpline

from .curves import ArcLengthTable, FrenetData, ParamCurve, arclength_reparam, frenet_evolve
from .errors import ChartDomainError, StepFailureError, TubeDegenerateError
from .manifolds import ChartMetric, geometry_at, metric_derivatives, sectional_curvature
from .parallel import ordered_map
from .spaceform_tubes import TWO_PI, InducedMetric2D, MetricValues, TubeProfile, validate_metric, validate_profile

RTOL = 1e-10
ATOL = 1e-12
DEFAULT_GRID = (64, 64)
S_TOL = 1e-8
CERTIFY_TOL = 1e-7
# Coordinates with |d_k g| above this somewhere along the sampled geodesics count as ones the metric depends on.
ACTIVE_COORD_TOL = 1e-10
SPLINE_PAD = 3


@dataclass(frozen=True)
class RadialState:
    rho: float
    x: np.ndarray
    xdot: np.ndarray
    frame: np.ndarray
    jacobi: np.ndarray | None = None

    @property
    def J_s(self) -> np.ndarray:
        return self.jacobi[0:3]

    @property
    def J_psi(self) -> np.ndarray:
        return self.jacobi[3:6]

    def gamma_prime_in_frame(self, g: np.ndarray) -> np.ndarray:
        return self.frame @ g @ self.xdot


@dataclass(frozen=True)
class RadialPath:
    """Samples of one radial geodesic; states[i] is at rho[i]."""
    rho: np.ndarray
    states: list[RadialState]

    def coordinates(self) -> np.ndarray:
        return np.array([st.x for st in self.states])

    def velocities(self) -> np.ndarray:
        return np.array([st.xdot for st in self.states])


def _radial_rhs(chart: ChartMetric, with_jacobi: bool):
    def rhs(_rho: float, y: np.ndarray) -> np.ndarray:
        x, v = y[0:3], y[3:6]
        frame = y[6:15].reshape(3, 3)
        geom = geometry_at(chart, x, with_riemann=with_jacobi)
        out = np.zeros_like(y)
        out[0:3] = v
        out[3:6] = -np.einsum("ijk,j,k->i", geom.gamma, v, v)
        out[6:15] = (-np.einsum("ijk,j,ak->ai", geom.gamma, v, frame)).ravel()
        if with_jacobi:
            c = y[15:21].reshape(2, 3)
            Rvv = np.einsum("ijkl,j,l->ik", geom.riemann, v, v)
            M = frame @ Rvv @ frame.T
            out[15:21] = y[21:27]
            out[21:27] = (-(c @ M.T)).ravel()
        return out

    return rhs


def _initial_state(start: FrenetData, phi: float, with_jacobi: bool) -> np.ndarray:
    c, s = math.cos(phi), math.sin(phi)
    y = np.zeros(27 if with_jacobi else 15)
    y[0:3] = start.x
    y[3:6] = c * start.N + s * start.B
    y[6:15] = np.concatenate([start.T, start.N, start.B])
    if with_jacobi:
        # J_s: value T, derivative D/ds of the launch direction; J_psi: value 0, derivative d/dphi of it.
        y[15] = 1.0
        y[21:24] = (-start.k1 * c, -start.k2 * s, start.k2 * c)
        y[24:27] = (0.0, -s, c)
    return y


def _integrate(
    chart: ChartMetric,
    start: FrenetData,
    phi: float,
    rho_eval: np.ndarray,
    with_jacobi: bool,
    rtol: float,
    atol: float,
) -> RadialPath:
    rho_eval = np.asarray(rho_eval, dtype=float)
    rho_max = float(rho_eval[-1])
    y0 = _initial_state(start, phi, with_jacobi)
    events = None
    if chart.domain_margin is not None:
        def leave(_rho, y):
            return chart.domain_margin(y[0:3])

        leave.terminal = True
        leave.direction = -1
        events = [leave]
    try:
        sol = solve_ivp(
            _radial_rhs(chart, with_jacobi), (0.0, rho_max), y0, method="DOP853",
            t_eval=rho_eval, rtol=rtol, atol=atol, events=events,
        )
    except ChartDomainError:
        raise ChartDomainError(chart.name, f"on radial geodesic from s={start.s:.6g}, phi={phi:.6g}") from None
    if events is not None and len(sol.t_events[0]):
        raise ChartDomainError(chart.name, f"at rho={sol.t_events[0][0]:.6g} from s={start.s:.6g}, phi={phi:.6g}")
    if sol.status != 0:
        raise StepFailureError(f"{sol.message} (s={start.s:.6g}, phi={phi:.6g})")
    states = [
        RadialState(
            rho=float(r),
            x=y[0:3].copy(),
            xdot=y[3:6].copy(),
            frame=y[6:15].reshape(3, 3).copy(),
            jacobi=np.concatenate([y[15:21], y[21:27]]) if with_jacobi else None,
        )
        for r, y in zip(sol.t, sol.y.T)
    ]
    return RadialPath(rho=np.asarray(sol.t), states=states)


def radial_geodesic(
    chart: ChartMetric,
    start: FrenetData,
    psi: float,
    rho_max: float,
    n_eval: int = 33,
    rtol: float = RTOL,
    atol: float = ATOL,
) -> RadialPath:
    """Geodesic from gamma(s0) with unit velocity cos(psi) N + sin(psi) B, with its parallel frame."""
    return _integrate(chart, start, psi, np.linspace(0.0, rho_max, n_eval), False, rtol, atol)


def transport_frame_and_jacobi(
    chart: ChartMetric,
    start: FrenetData,
    psi: float,
    rho0: float,
    rtol: float = RTOL,
    atol: float = ATOL,
) -> RadialState:
    """State at rho0 including the Jacobi fields J_s and J_psi in the transported frame."""
    return _integrate(chart, start, psi, np.array([0.0, rho0]), True, rtol, atol).states[-1]


def jacobi_path(
    chart: ChartMetric,
    start: FrenetData,
    psi: float,
    rho_eval: Sequence[float],
    rtol: float = RTOL,
    atol: float = ATOL,
) -> RadialPath:
    return _integrate(chart, start, psi, np.asarray(rho_eval, dtype=float), True, rtol, atol)


def _node_form(state: RadialState, g: np.ndarray, dr: float, dphi: float) -> tuple[float, float, float]:
    """E, F, G from d(beta)/ds = J_s and d(beta)/dpsi = r' gamma' + phi' J_phi (orthonormal frame components)."""
    js = state.J_s
    jpsi = dr * state.gamma_prime_in_frame(g) + dphi * state.J_psi
    return float(js @ js), float(js @ jpsi), float(jpsi @ jpsi)


# ── Interpolated metrics ─────────────────────────────────────────────────────


def _pad(values: np.ndarray, coords: np.ndarray, period: float, axis: int) -> tuple[np.ndarray, np.ndarray]:
    k = SPLINE_PAD
    coords = np.concatenate([coords[-k:] - period, coords, coords[:k] + period])
    values = np.concatenate([np.take(values, range(-k, 0), axis=axis), values,
                             np.take(values, range(k), axis=axis)], axis=axis)
    return values, coords


def _psi_only(psi: np.ndarray, table: np.ndarray) -> CubicSpline:
    """Periodic spline in psi; table has shape (n_psi,)."""
    return CubicSpline(np.append(psi, TWO_PI), np.append(table, table[0]), bc_type="periodic")


def metric_from_samples(
    frame: pd.DataFrame,
    s_period: float | None = None,
    s_tol: float = S_TOL,
    name: str = "numeric_tube",
    info: dict | None = None,
) -> InducedMetric2D:
    """Interpolated metric from a (s, psi, E, F, G) grid such as the CSV written by a tube-metric run.

    psi samples must cover [0, 2pi) uniformly. If E, F, G vary by less than s_tol across s the
    result depends on psi only and is flagged s_independent.
    """
    missing = {"s", "psi", "E", "F", "G"} - set(frame.columns)
    if missing:
        raise ValueError(f"metric samples lack columns {sorted(missing)}")
    frame = frame.sort_values(["s", "psi"], kind="mergesort")
    s = np.unique(frame["s"].to_numpy(dtype=float))
    psi = np.unique(frame["psi"].to_numpy(dtype=float))
    if len(s) * len(psi) != len(frame):
        raise ValueError(f"metric samples are not a full grid ({len(s)} x {len(psi)} != {len(frame)})")
    tables = {c: frame[c].to_numpy(dtype=float).reshape(len(s), len(psi)) for c in ("E", "F", "G")}
    deviation = max(float(np.max(np.ptp(t, axis=0))) for t in tables.values())
    s_range = (float(s[0]), float(s[0] + s_period) if s_period is not None else float(s[-1]))
    info = {**(info or {}), "s_deviation": deviation, "grid": [len(s), len(psi)]}

    if deviation < s_tol or len(s) == 1:
        splines = {c: _psi_only(psi, t.mean(axis=0)) for c, t in tables.items()}

        def coefficients(s_: np.ndarray, p: np.ndarray) -> MetricValues:
            q = np.mod(p, TWO_PI)
            zero = np.zeros_like(q)
            E, F, G = (splines[c](q) for c in ("E", "F", "G"))
            dE, dF, dG = (splines[c](q, 1) for c in ("E", "F", "G"))
            return MetricValues(E, F, G, zero, dE, zero.copy(), dF, zero.copy(), dG)

        return InducedMetric2D(coefficients, s_period, s_range, True, name=name, info=info)

    padded = {}
    for c, t in tables.items():
        vals, psi_nodes = _pad(t, psi, TWO_PI, axis=1)
        s_nodes = s
        if s_period is not None:
            vals, s_nodes = _pad(vals, s, s_period, axis=0)
        padded[c] = RectBivariateSpline(s_nodes, psi_nodes, vals, kx=3, ky=3, s=0)

    def coefficients(s_: np.ndarray, p: np.ndarray) -> MetricValues:
        q = np.mod(p, TWO_PI)
        u = s_range[0] + np.mod(s_ - s_range[0], s_period) if s_period is not None else s_
        out = []
        for c in ("E", "F", "G"):
            spl = padded[c]
            out.append((spl.ev(u, q), spl.ev(u, q, dx=1), spl.ev(u, q, dy=1)))
        (E, E_s, E_p), (F, F_s, F_p), (G, G_s, G_p) = out
        return MetricValues(E, F, G, E_s, E_p, F_s, F_p, G_s, G_p)

    return InducedMetric2D(coefficients, s_period, s_range, False, name=name, info=info)


def sample_tube_grid(
    chart: ChartMetric,
    curve: ParamCurve,
    profile: TubeProfile,
    grid: tuple[int, int] = DEFAULT_GRID,
    table: ArcLengthTable | None = None,
    rtol: float = RTOL,
    atol: float = ATOL,
    workers: int | None = None,
) -> pd.DataFrame:
    """(s, psi, E, F, G) at every node, one radial integration per node, rows ordered s-major."""
    validate_profile(profile)
    n_s, n_psi = grid
    table = table or arclength_reparam(curve)
    s = np.linspace(0.0, table.length, n_s, endpoint=not curve.closed)
    psi = np.linspace(0.0, TWO_PI, n_psi, endpoint=False)
    frames = frenet_evolve(curve, s, table)
    polar = profile.polar(psi)
    phis = np.arctan2(polar.sin_phi, polar.cos_phi)

    def node(ij: tuple[int, int]) -> tuple[float, float, float]:
        i, j = ij
        state = transport_frame_and_jacobi(chart, frames[i], float(phis[j]), float(polar.r[j]), rtol, atol)
        g = geometry_at(chart, state.x, with_riemann=False).g
        return _node_form(state, g, float(polar.dr[j]), float(polar.dphi[j]))

    nodes = [(i, j) for i in range(n_s) for j in range(n_psi)]
    values = np.array(ordered_map(node, nodes, workers))
    S, P = np.meshgrid(s, psi, indexing="ij")
    return pd.DataFrame({
        "s": S.ravel(),
        "psi": P.ravel(),
        "E": values[:, 0],
        "F": values[:, 1],
        "G": values[:, 2],
    })


def tube_metric_numeric(
    chart: ChartMetric,
    curve: ParamCurve,
    profile: TubeProfile,
    grid: tuple[int, int] = DEFAULT_GRID,
    table: ArcLengthTable | None = None,
    s_tol: float = S_TOL,
    rtol: float = RTOL,
    atol: float = ATOL,
    workers: int | None = None,
    samples: pd.DataFrame | None = None,
) -> InducedMetric2D:
    """Interpolated tube metric from radial integrations; pass samples to reuse an already sampled grid."""
    table = table or arclength_reparam(curve)
    if samples is None:
        samples = sample_tube_grid(chart, curve, profile, grid, table, rtol, atol, workers)
    det = samples["E"] * samples["G"] - samples["F"] ** 2
    if not bool((det > 0).all()):
        k = int(det.to_numpy().argmin())
        row = samples.iloc[k]
        raise TubeDegenerateError(f"EG - F^2 = {det.iloc[k]:.3e} at s={row['s']:.6g}, psi={row['psi']:.6g}")
    metric = metric_from_samples(
        samples,
        s_period=table.length if curve.closed else None,
        s_tol=s_tol,
        name=f"numeric_tube[{chart.name}]",
        info={"chart": chart.name, "curve": curve.name, "profile": profile.to_dict()},
    )
    validate_metric(metric, grid)
    return metric


# ── s-independence ───────────────────────────────────────────────────────────


@dataclass
class SIndependenceReport:
    coordinate_deviation: float
    curvature_derivative: float
    velocity_deviation: float
    active_coordinates: tuple[int, ...]
    verdict: bool
    tol: float
    step: float
    samples: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "coordinate_deviation": self.coordinate_deviation,
            "curvature_derivative": self.curvature_derivative,
            "velocity_deviation": self.velocity_deviation,
            "active_coordinates": list(self.active_coordinates),
            "verdict": self.verdict,
            "tol": self.tol,
            "step": self.step,
        }


def _plane_curvatures(chart: ChartMetric, state: RadialState) -> np.ndarray:
    T, N, B = state.frame
    return np.array([
        sectional_curvature(chart, state.x, T, N),
        sectional_curvature(chart, state.x, T, B),
        sectional_curvature(chart, state.x, N, B),
    ])


def s_independence_certificate(
    chart: ChartMetric,
    curve: ParamCurve,
    rho0: float,
    samples: int = 8,
    tol: float = CERTIFY_TOL,
    n_psi: int = 4,
    n_rho: int = 4,
    table: ArcLengthTable | None = None,
    workers: int | None = None,
) -> SIndependenceReport:
    """Compare radial geodesics launched from s0 and s0 + h (h = 1e-3 L) at the same psi.

    Only coordinates the metric depends on are compared; sectional curvatures of the transported
    planes (T~,N~), (T~,B~), (N~,B~) are differenced in s along the same geodesics.
    """
    table = table or arclength_reparam(curve)
    h = 1e-3 * table.length
    s0 = np.linspace(0.0, table.length, samples, endpoint=not curve.closed)
    if not curve.closed:
        s0 = np.clip(s0, 0.0, table.length - h)
    frames = frenet_evolve(curve, np.concatenate([s0, s0 + h]), table)
    psi = np.linspace(0.0, TWO_PI, n_psi, endpoint=False)
    rho_eval = np.linspace(0.0, rho0, n_rho + 1)

    def pair(ij: tuple[int, int]):
        i, j = ij
        a = radial_geodesic(chart, frames[i], float(psi[j]), rho0, n_eval=n_rho + 1)
        b = radial_geodesic(chart, frames[samples + i], float(psi[j]), rho0, n_eval=n_rho + 1)
        return a, b

    jobs = [(i, j) for i in range(samples) for j in range(n_psi)]
    paths = ordered_map(pair, jobs, workers)

    active = np.zeros(3, dtype=bool)
    for a, _ in paths:
        for st in a.states:
            dg, _ = metric_derivatives(chart, st.x, need_hessian=False)
            active |= np.max(np.abs(dg), axis=(1, 2)) > ACTIVE_COORD_TOL
    idx = tuple(int(k) for k in np.flatnonzero(active))

    rows = []
    for (i, j), (a, b) in zip(jobs, paths):
        for sa, sb in zip(a.states[1:], b.states[1:]):
            d_coord = float(np.max(np.abs(sa.x[list(idx)] - sb.x[list(idx)]))) if idx else 0.0
            d_vel = float(np.max(np.abs(sa.xdot - sb.xdot)))
            dK = float(np.max(np.abs(_plane_curvatures(chart, sb) - _plane_curvatures(chart, sa)))) / h
            rows.append({"s0": float(s0[i]), "psi": float(psi[j]), "rho": sa.rho,
                         "coordinate_deviation": d_coord, "velocity_deviation": d_vel,
                         "curvature_derivative": dK})
    coord = max(r["coordinate_deviation"] for r in rows)
    curv = max(r["curvature_derivative"] for r in rows)
    vel = max(r["velocity_deviation"] for r in rows)
    return SIndependenceReport(
        coordinate_deviation=coord,
        curvature_derivative=curv,
        velocity_deviation=vel,
        active_coordinates=idx,
        verdict=bool(coord < tol and curv < tol),
        tol=tol,
        step=h,
        samples=rows,
    )
