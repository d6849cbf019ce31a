"""Poincare sections of the tube geodesic flow at s = 0 mod L and per-orbit regularity scores."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import pandas as pd
from scipy.optimize import brentq, minimize_scalar

from .curves import arclength_reparam, curvature_profile, ellipse
from .errors import InsufficientPointsError, TubeDegenerateError, TubeToolkitError
from .flow import DEFAULT_TOL, hamiltonian_values, seed_from_section, solve_flow
from .parallel import ordered_map
from .spaceform_tubes import TWO_PI, InducedMetric2D, circular_profile, tube_metric

REGULAR_THRESHOLD = 1e-3
MIN_POINTS = 50
DEFAULT_ORDER = 60
# Dense-output samples per solver step when looking for section crossings.
CROSSING_SUBSTEPS = 8


@dataclass(frozen=True)
class SectionConfig:
    section_period: float
    seeds: tuple[tuple[float, float], ...]
    n_crossings: int = 400
    direction: int = 1
    crossing_tol: float = 1e-10
    tol: float = DEFAULT_TOL
    max_step: float = math.inf
    # Give up on a seed after this flow length without n_crossings upward crossings.
    max_length: float | None = None

    def __post_init__(self) -> None:
        if self.n_crossings < 1:
            raise ValueError(f"n_crossings must be >= 1, got {self.n_crossings}")
        if self.direction not in (-1, 1):
            raise ValueError(f"direction must be +1 or -1, got {self.direction}")
        if not self.section_period > 0:
            raise ValueError(f"section_period must be positive, got {self.section_period}")


@dataclass(frozen=True)
class SectionPoint:
    psi: float
    p_psi: float
    seed_index: int
    crossing_index: int
    p_s: float
    H: float
    s_offset: float
    tau: float

    def to_dict(self) -> dict:
        return {
            "seed_index": self.seed_index,
            "crossing_index": self.crossing_index,
            "psi": self.psi,
            "p_psi": self.p_psi,
            "p_s": self.p_s,
            "H": self.H,
        }


@dataclass
class SectionRun:
    """Points in seed-major, crossing-minor order; errors maps seed index to the failure that cut it short."""
    points: list[SectionPoint]
    seeds: tuple[tuple[float, float], ...]
    seed_p_s: list[float]
    errors: dict[int, str] = field(default_factory=dict)

    def by_seed(self) -> dict[int, list[SectionPoint]]:
        out: dict[int, list[SectionPoint]] = {i: [] for i in range(len(self.seeds))}
        for pt in self.points:
            out[pt.seed_index].append(pt)
        return out

    @property
    def complete(self) -> bool:
        return not self.errors


@dataclass(frozen=True)
class OrbitRegularity:
    seed_index: int
    residual: float
    classification: str
    n_points: int
    mode: str
    order: int

    @property
    def regular(self) -> bool:
        return self.classification == "regular"

    def to_dict(self) -> dict:
        return {
            "seed_index": self.seed_index,
            "residual": self.residual,
            "classification": self.classification,
            "n_points": self.n_points,
            "mode": self.mode,
            "order": self.order,
        }


def ellipse_tube_metric(a_semi: float, b_semi: float, rho0: float, n_profile: int = 512) -> InducedMetric2D:
    """E = (1 - k1(s) rho0 cos psi)^2, F = 0, G = rho0^2 about the planar ellipse; s-period is its perimeter."""
    if a_semi <= 0 or b_semi <= 0:
        raise ValueError(f"semi-axes must be positive, got ({a_semi}, {b_semi})")
    k1_max = max(a_semi / b_semi ** 2, b_semi / a_semi ** 2)
    if rho0 * k1_max >= 1.0:
        raise TubeDegenerateError(f"rho0 * max k1 = {rho0 * k1_max:.6g} >= 1 about the ({a_semi}, {b_semi}) ellipse")
    curve = ellipse(a_semi, b_semi)
    profile = circular_profile(rho0)
    name = f"ellipse_tube({a_semi:g},{b_semi:g})"
    if a_semi == b_semi:
        metric = tube_metric(0, 1.0 / a_semi, 0.0, profile, s_period=TWO_PI * a_semi, name=name)
    else:
        table = arclength_reparam(curve)
        k1 = curvature_profile(curve, n_profile, table)
        metric = tube_metric(0, k1.k1, 0.0, profile, dk1=k1.k1.derivative(), s_period=table.length, name=name)
    metric.info.update({"a_semi": float(a_semi), "b_semi": float(b_semi)})
    return metric


def default_seed_grid(psi0: float = 0.0, momenta: Sequence[float] | None = None) -> list[tuple[float, float]]:
    """psi0 with p_psi in -0.9, -0.7, ..., 0.9."""
    if momenta is None:
        momenta = np.round(np.linspace(-0.9, 0.9, 10), 12)
    return [(float(psi0), float(p)) for p in momenta]


def unstable_equator(metric: InducedMetric2D, s: float = 0.0, n_grid: int = 720) -> float:
    """psi minimizing E(s, psi): the inner equator, unstable in the constant-curvature limit."""
    psi = np.linspace(0.0, TWO_PI, n_grid, endpoint=False)
    E = metric.E(np.full_like(psi, s), psi)
    k = int(np.argmin(E))
    h = TWO_PI / n_grid
    res = minimize_scalar(lambda p: float(metric.E(s, p)), bounds=(psi[k] - h, psi[k] + h), method="bounded",
                          options={"xatol": 1e-10})
    return float(np.mod(res.x, TWO_PI))


def separatrix_seeds(
    metric: InducedMetric2D,
    offsets: Sequence[float] = (0.05,),
    momenta: Sequence[float] = (-0.05, -0.02, 0.02, 0.05),
    s: float = 0.0,
) -> list[tuple[float, float]]:
    psi_star = unstable_equator(metric, s)
    return [(float(np.mod(psi_star + d, TWO_PI)), float(p)) for d in offsets for p in momenta]


def section_crossings(sol, L: float, substeps: int = CROSSING_SUBSTEPS) -> list[tuple[float, float, int]]:
    """(tau, boundary, direction) of every crossing of s = 0 mod L, in time order; direction is +1 when s increases.

    The dense output is sampled inside each solver step, so an excursion that crosses a
    boundary and returns within one step is still bracketed. Each bracket is refined with brentq.
    """
    t = np.asarray(sol.t, dtype=float)
    fractions = np.arange(substeps) / substeps
    ts = np.append((t[:-1, None] + np.diff(t)[:, None] * fractions[None, :]).ravel(), t[-1])
    cell = np.floor(np.asarray(sol.sol(ts))[0] / L)
    out = []
    for k in np.flatnonzero(np.diff(cell) != 0):
        boundary = max(cell[k], cell[k + 1]) * L
        t_star = brentq(lambda u: sol.sol(u)[0] - boundary, ts[k], ts[k + 1], xtol=1e-14,
                        rtol=4.0 * np.finfo(float).eps)
        out.append((float(t_star), float(boundary), 1 if cell[k + 1] > cell[k] else -1))
    return out


def _seed_orbit(metric: InducedMetric2D, config: SectionConfig, index: int, y0: np.ndarray):
    """Crossings of one seed; returns (points, error message or None)."""
    L = config.section_period
    max_step = min(config.max_step, 0.25 * L)
    chunk = max(10.0 * L, 50.0)
    max_length = config.max_length if config.max_length is not None else 50.0 * L * config.n_crossings
    points: list[SectionPoint] = []
    tau0 = 0.0
    y = np.asarray(y0, dtype=float)
    try:
        while len(points) < config.n_crossings:
            if tau0 >= max_length:
                return points, f"{len(points)} of {config.n_crossings} crossings within flow length {max_length:g}"
            sol = solve_flow(metric, y, (tau0, tau0 + chunk), config.tol, max_step)
            for t_star, boundary, direction in section_crossings(sol, L):
                if direction != config.direction or t_star <= tau0:
                    continue
                ys = sol.sol(t_star)
                offset = float(ys[0] - boundary)
                if abs(offset) >= config.crossing_tol:
                    return points, f"crossing refinement missed the section by {offset:.3e}"
                points.append(SectionPoint(
                    psi=float(np.mod(ys[1], TWO_PI)),
                    p_psi=float(ys[3]),
                    seed_index=index,
                    crossing_index=len(points),
                    p_s=float(ys[2]),
                    H=float(hamiltonian_values(metric, ys[0], ys[1], ys[2], ys[3])),
                    s_offset=offset,
                    tau=float(t_star),
                ))
                if len(points) == config.n_crossings:
                    break
            tau0 = float(sol.t[-1])
            y = sol.y[:, -1]
    except TubeToolkitError as e:
        return points, str(e)
    return points, None


def section(metric: InducedMetric2D, config: SectionConfig, workers: int | None = None) -> SectionRun:
    """Upward crossings of s = 0 mod L for every seed; seeds run concurrently, output in seed order.

    Infeasible seeds raise before any integration; a seed whose integration fails keeps the
    crossings found so far and its error is recorded in the run.
    """
    seeds = [seed_from_section(metric, 0.0, psi0, p0, config.direction) for psi0, p0 in config.seeds]

    def run(item):
        i, st = item
        return _seed_orbit(metric, config, i, st.as_array())

    results = ordered_map(run, list(enumerate(seeds)), workers)
    points: list[SectionPoint] = []
    errors: dict[int, str] = {}
    for i, (pts, err) in enumerate(results):
        points.extend(pts)
        if err is not None:
            errors[i] = err
    return SectionRun(points=points, seeds=tuple(config.seeds), seed_p_s=[st.p_s for st in seeds], errors=errors)


def points_frame(points: Iterable[SectionPoint]) -> pd.DataFrame:
    rows = [pt.to_dict() for pt in points]
    return pd.DataFrame(rows, columns=["seed_index", "crossing_index", "psi", "p_psi", "p_s", "H"])


def momentum_drift(run: SectionRun) -> dict[int, float]:
    """max |p_s(crossing) - p_s(seed)| per seed."""
    out = {}
    for i, pts in run.by_seed().items():
        out[i] = max((abs(pt.p_s - run.seed_p_s[i]) for pt in pts), default=0.0)
    return out


# ── Regularity ───────────────────────────────────────────────────────────────


def _design(theta: np.ndarray, order: int) -> np.ndarray:
    k = np.arange(1, order + 1)
    ang = np.multiply.outer(theta, k)
    return np.hstack([np.ones((len(theta), 1)), np.cos(ang), np.sin(ang)])


def _design_derivative(theta: np.ndarray, order: int) -> np.ndarray:
    k = np.arange(1, order + 1)
    ang = np.multiply.outer(theta, k)
    return np.hstack([np.zeros((len(theta), 1)), -np.sin(ang) * k, np.cos(ang) * k])


def _fourier_fit(theta: np.ndarray, values: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares Fourier series of the given order; returns (fitted values, fitted derivative)."""
    A = _design(theta, order)
    coeffs, *_ = np.linalg.lstsq(A, values, rcond=None)
    return A @ coeffs, _design_derivative(theta, order) @ coeffs


def _is_rotational(psi: np.ndarray, p: np.ndarray) -> bool:
    """p keeps one sign and the points go all the way round in psi."""
    if not (np.all(p > 0) or np.all(p < 0)):
        return False
    gaps = np.diff(np.concatenate([np.sort(psi), [np.min(psi) + TWO_PI]]))
    return float(np.max(gaps)) < 0.5 * math.pi


def orbit_residual(psi: np.ndarray, p: np.ndarray, order: int = DEFAULT_ORDER) -> tuple[float, str, int]:
    """RMS orthogonal distance of (psi, p) points to a fitted smooth closed curve.

    Rotational orbits are fitted as a graph p(psi). Librating orbits are fitted in polar form about
    their centroid, with psi measured from its circular mean, so they must be star-shaped about that
    centroid: a crescent, or an island chain visited by a single orbit, scores as irregular.
    """
    psi = np.asarray(psi, dtype=float)
    p = np.asarray(p, dtype=float)
    order = max(1, min(order, (len(psi) - 1) // 4))
    if _is_rotational(psi, p):
        fit, slope = _fourier_fit(psi, p, order)
        dist = np.abs(p - fit) / np.sqrt(1.0 + slope ** 2)
        return float(np.sqrt(np.mean(dist ** 2))), "rotational", order
    centre_psi = math.atan2(float(np.mean(np.sin(psi))), float(np.mean(np.cos(psi))))
    x = np.mod(psi - centre_psi + math.pi, TWO_PI) - math.pi
    x = x - np.mean(x)
    y = p - np.mean(p)
    theta = np.arctan2(y, x)
    r = np.hypot(x, y)
    fit, slope = _fourier_fit(theta, r, order)
    dist = np.abs(r - fit) * np.abs(fit) / np.sqrt(fit ** 2 + slope ** 2)
    return float(np.sqrt(np.mean(dist ** 2))), "librating", order


def regularity_score(
    points: SectionRun | Iterable[SectionPoint],
    order: int = DEFAULT_ORDER,
    threshold: float = REGULAR_THRESHOLD,
    momentum_scale: float = 1.0,
    min_points: int = MIN_POINTS,
) -> list[OrbitRegularity]:
    """One score per seed, in seed order; orbits whose residual stays under threshold * momentum_scale are regular."""
    groups: dict[int, list[SectionPoint]] = {}
    for pt in (points.points if isinstance(points, SectionRun) else points):
        groups.setdefault(pt.seed_index, []).append(pt)
    out = []
    for i in sorted(groups):
        pts = groups[i]
        if len(pts) < min_points:
            raise InsufficientPointsError(i, len(pts), min_points)
        residual, mode, used = orbit_residual(np.array([pt.psi for pt in pts]), np.array([pt.p_psi for pt in pts]), order)
        label = "regular" if residual < threshold * momentum_scale else "irregular"
        out.append(OrbitRegularity(i, residual, label, len(pts), mode, used))
    return out
