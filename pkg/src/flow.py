"""Geodesic flow on a tube metric as a 2-degree-of-freedom Hamiltonian system in (s, psi, p_s, p_psi)."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import pandas as pd
from scipy.integrate import solve_ivp

from .errors import DegenerateMetricError, LeftDomainError, SeedInfeasibleError, StepFailureError
from .spaceform_tubes import InducedMetric2D, inverse_form

DEFAULT_TOL = 1e-11


@dataclass(frozen=True)
class FlowState:
    s: float
    psi: float
    p_s: float
    p_psi: float
    tau: float = 0.0

    @property
    def q(self) -> tuple[float, float]:
        return self.s, self.psi

    @property
    def p(self) -> tuple[float, float]:
        return self.p_s, self.p_psi

    def as_array(self) -> np.ndarray:
        return np.array([self.s, self.psi, self.p_s, self.p_psi])

    def reversed(self) -> "FlowState":
        """Same point, momenta negated: the flow of this state retraces the original backwards."""
        return FlowState(self.s, self.psi, -self.p_s, -self.p_psi, self.tau)

    @classmethod
    def from_array(cls, y, tau: float = 0.0) -> "FlowState":
        return cls(float(y[0]), float(y[1]), float(y[2]), float(y[3]), float(tau))


def _check_domain(metric: InducedMetric2D, s: float) -> None:
    if metric.s_period is None:
        lo, hi = metric.s_range
        if not lo <= s <= hi:
            raise LeftDomainError(s, metric.s_range)


def hamiltonian_values(metric: InducedMetric2D, s, psi, p_s, p_psi) -> np.ndarray:
    v = metric.at(s, psi)
    a, b, c = inverse_form(v.E, v.F, v.G)
    return 0.5 * (a * p_s * p_s + 2.0 * b * p_s * p_psi + c * p_psi * p_psi)


def hamiltonian(metric: InducedMetric2D, state: FlowState) -> float:
    """H = 1/2 g^ij p_i p_j."""
    _check_domain(metric, state.s)
    return float(hamiltonian_values(metric, state.s, state.psi, state.p_s, state.p_psi))


def hamiltonian_vector_field(metric: InducedMetric2D) -> Callable[[float, np.ndarray], np.ndarray]:
    """q' = g^-1 p, p'_k = 1/2 q'^T (d_k g) q'."""

    def field(_tau: float, y: np.ndarray) -> np.ndarray:
        s, psi, p_s, p_psi = y
        v = metric.at(s, psi)
        a, b, c = inverse_form(v.E, v.F, v.G)
        u = a * p_s + b * p_psi
        w = b * p_s + c * p_psi
        dp_s = 0.5 * (v.E_s * u * u + 2.0 * v.F_s * u * w + v.G_s * w * w)
        dp_psi = 0.5 * (v.E_psi * u * u + 2.0 * v.F_psi * u * w + v.G_psi * w * w)
        return np.array([float(u), float(w), float(dp_s), float(dp_psi)])

    return field


def _domain_event(metric: InducedMetric2D):
    lo, hi = metric.s_range

    def leave(_tau: float, y: np.ndarray) -> float:
        return min(y[0] - lo, hi - y[0])

    leave.terminal = True
    leave.direction = -1
    return leave


def solve_flow(
    metric: InducedMetric2D,
    y0: np.ndarray,
    t_span: tuple[float, float],
    tol: float = DEFAULT_TOL,
    max_step: float = math.inf,
    dense_output: bool = True,
):
    """One DOP853 run of the Hamiltonian flow; raises LeftDomainError or StepFailureError."""
    events = [_domain_event(metric)] if metric.s_period is None else None
    sol = solve_ivp(
        hamiltonian_vector_field(metric), t_span, np.asarray(y0, dtype=float), method="DOP853",
        rtol=tol, atol=tol, max_step=max_step, dense_output=dense_output, events=events,
    )
    if events is not None and len(sol.t_events[0]):
        raise LeftDomainError(float(sol.y_events[0][0][0]), metric.s_range)
    if sol.status != 0:
        raise StepFailureError(sol.message)
    return sol


@dataclass
class Trajectory:
    tau: np.ndarray
    y: np.ndarray
    H: np.ndarray
    dense: object | None = None

    @property
    def energy_drift(self) -> float:
        return float(np.max(np.abs(self.H - self.H[0])))

    @property
    def ps_drift(self) -> float:
        return float(np.max(np.abs(self.y[2] - self.y[2, 0])))

    @property
    def final(self) -> FlowState:
        return FlowState.from_array(self.y[:, -1], self.tau[-1])

    def state(self, k: int) -> FlowState:
        return FlowState.from_array(self.y[:, k], self.tau[k])

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "tau": self.tau,
            "s": self.y[0],
            "psi": self.y[1],
            "p_s": self.y[2],
            "p_psi": self.y[3],
            "H": self.H,
        })

    def diagnostics(self) -> dict[str, float]:
        return {"energy_drift": self.energy_drift, "ps_drift": self.ps_drift, "length": float(self.tau[-1] - self.tau[0])}


def integrate(
    metric: InducedMetric2D,
    state0: FlowState,
    length: float,
    tol: float = DEFAULT_TOL,
    max_step: float = math.inf,
    n_out: int | None = None,
) -> Trajectory:
    """Flow for parameter length `length`; samples at solver steps unless n_out is given."""
    if hamiltonian(metric, state0) <= 0.0:
        raise ValueError("initial state has H <= 0")
    span = (state0.tau, state0.tau + float(length))
    sol = solve_flow(metric, state0.as_array(), span, tol, max_step)
    if n_out is not None:
        tau = np.linspace(span[0], span[1], n_out)
        y = sol.sol(tau)
    else:
        tau, y = sol.t, sol.y
    H = hamiltonian_values(metric, y[0], y[1], y[2], y[3])
    return Trajectory(tau=np.asarray(tau), y=np.asarray(y), H=np.asarray(H, dtype=float), dense=sol.sol)


def unit_speed_seed(metric: InducedMetric2D, q0: tuple[float, float], direction_angle: float) -> FlowState:
    """Momentum of the unit vector at angle direction_angle from d/ds, in the orthonormal frame
    e1 = d_s / sqrt(E), e2 = (d_psi - (F/E) d_s) / sqrt(G - F^2/E)."""
    s, psi = float(q0[0]), float(q0[1])
    _check_domain(metric, s)
    v = metric.at(s, psi)
    E, F, G = float(v.E), float(v.F), float(v.G)
    det = E * G - F * F
    if E <= 0.0 or det <= 1e-14:
        raise DegenerateMetricError(f"(s={s:.6g}, psi={psi:.6g})")
    e1 = np.array([1.0 / math.sqrt(E), 0.0])
    e2 = np.array([-F / E, 1.0]) / math.sqrt(det / E)
    vel = math.cos(direction_angle) * e1 + math.sin(direction_angle) * e2
    g = np.array([[E, F], [F, G]])
    p = g @ vel
    return FlowState(s, psi, float(p[0]), float(p[1]))


def seed_from_section(
    metric: InducedMetric2D,
    s: float,
    psi: float,
    p_psi: float,
    direction: int = 1,
    energy: float = 0.5,
) -> FlowState:
    """Solve H(s, psi, p_s, p_psi) = energy for p_s with sign(p_s) = direction."""
    v = metric.at(s, psi)
    a, b, c = (float(t) for t in inverse_form(v.E, v.F, v.G))
    disc = (b * p_psi) ** 2 - a * (c * p_psi * p_psi - 2.0 * energy)
    if disc < 0.0:
        raise SeedInfeasibleError(psi, p_psi)
    p_s = (-b * p_psi + direction * math.sqrt(disc)) / a
    if p_s * direction <= 0.0:
        raise SeedInfeasibleError(psi, p_psi)
    return FlowState(float(s), float(psi), p_s, float(p_psi))


def geodesic_residual(metric: InducedMetric2D, trajectory: Trajectory, n_points: int = 50, h: float = 5e-3) -> float:
    """Max over interior points of |g q'' + (d_m g q'^m) q' - 1/2 q'^T (d_k g) q'|, with q' and q''
    from five-point differences of the dense position q(tau) alone."""
    if trajectory.dense is None:
        raise ValueError("trajectory has no dense output")
    t0, t1 = float(trajectory.tau[0]), float(trajectory.tau[-1])
    taus = np.linspace(t0 + 3.0 * h, t1 - 3.0 * h, n_points)
    worst = 0.0
    for t in taus:
        q = [trajectory.dense(t + k * h)[:2] for k in (-2, -1, 0, 1, 2)]
        dq = (q[0] - 8.0 * q[1] + 8.0 * q[3] - q[4]) / (12.0 * h)
        ddq = (-q[0] + 16.0 * q[1] - 30.0 * q[2] + 16.0 * q[3] - q[4]) / (12.0 * h * h)
        v = metric.at(q[2][0], q[2][1])
        g = np.array([[v.E, v.F], [v.F, v.G]], dtype=float)
        dg = np.array([[[v.E_s, v.F_s], [v.F_s, v.G_s]], [[v.E_psi, v.F_psi], [v.F_psi, v.G_psi]]], dtype=float)
        res = g @ ddq + np.einsum("mkj,m,j->k", dg, dq, dq) - 0.5 * np.einsum("kij,i,j->k", dg, dq, dq)
        worst = max(worst, float(np.max(np.abs(res))))
    return worst
