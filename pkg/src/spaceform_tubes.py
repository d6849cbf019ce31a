"""Closed-form tubes in space forms: Jacobi fields, tube profiles and the induced first fundamental form."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence, Union

import numpy as np
import pandas as pd

from .errors import DegenerateMetricError, ProfileNotSimpleError, TubeDegenerateError
from .manifolds import SpaceFormTag

CIRCULAR = "circular"
GENERALIZED = "generalized"

TWO_PI = 2.0 * math.pi
VALIDATION_GRID = (64, 64)
PROFILE_GRID = 512
# Step for s-derivatives of curvature functions given without derivatives.
CURVATURE_FD_STEP = 1e-5


class SpaceFormScale(NamedTuple):
    F0: float
    G0: float


def scale_functions(K0: int, r):
    """(F, G, dF/dr, dG/dr) for curvature K0: F'' = -K0 F with F(0)=1, F'(0)=0 and G(0)=0, G'(0)=1."""
    r = np.asarray(r, dtype=float)
    if K0 == 1:
        F, G = np.cos(r), np.sin(r)
    elif K0 == 0:
        F, G = np.ones_like(r), r.copy()
    elif K0 == -1:
        F, G = np.cosh(r), np.sinh(r)
    else:
        raise ValueError(f"K0 must be -1, 0 or 1, got {K0}")
    return F, G, -K0 * G, F


def spaceform_scale(K0: SpaceFormTag | int, rho0: float) -> SpaceFormScale:
    F, G, _, _ = scale_functions(_k0(K0), rho0)
    return SpaceFormScale(float(F), float(G))


def _k0(K0: SpaceFormTag | int) -> int:
    return K0.K0 if isinstance(K0, SpaceFormTag) else SpaceFormTag(int(K0)).K0


def spaceform_jacobi(K0: SpaceFormTag | int, rho: float, J0, J1, gamma_dir) -> np.ndarray:
    """Jacobi field at rho along a unit-speed radial geodesic, components in a parallel frame.

    J(rho) = (<J0,e> + rho <J1,e>) e + F(rho) J0_perp + G(rho) J1_perp with e = gamma_dir.
    """
    e = np.asarray(gamma_dir, dtype=float)
    J0 = np.asarray(J0, dtype=float)
    J1 = np.asarray(J1, dtype=float)
    F, G, _, _ = scale_functions(_k0(K0), rho)
    a0, a1 = float(J0 @ e), float(J1 @ e)
    return (a0 + rho * a1) * e + float(F) * (J0 - a0 * e) + float(G) * (J1 - a1 * e)


# ── Profiles ─────────────────────────────────────────────────────────────────


def _series(coeff_cos: np.ndarray, coeff_sin: np.ndarray, psi: np.ndarray, order: int) -> np.ndarray:
    """order-th derivative of sum_k a_k cos(k psi) + b_k sin(k psi)."""
    n = max(len(coeff_cos), len(coeff_sin))
    a = np.zeros(n)
    b = np.zeros(n)
    a[: len(coeff_cos)] = coeff_cos
    b[: len(coeff_sin)] = coeff_sin
    k = np.arange(n, dtype=float)
    ang = np.multiply.outer(psi, k)
    c, s = np.cos(ang), np.sin(ang)
    if order == 0:
        return c @ a + s @ b
    if order == 1:
        return (-s * k) @ a + (c * k) @ b
    return (-c * k * k) @ a + (-s * k * k) @ b


class ProfilePolar(NamedTuple):
    """Polar form of rho0 (f, g): radius r, its derivatives, angle phi through cos/sin, phi' and phi''."""
    r: np.ndarray
    dr: np.ndarray
    ddr: np.ndarray
    cos_phi: np.ndarray
    sin_phi: np.ndarray
    dphi: np.ndarray
    ddphi: np.ndarray


@dataclass(frozen=True)
class TubeProfile:
    """Cross-section rho0 (f(psi), g(psi)) in the normal plane, f and g as truncated Fourier series.

    kind == circular means f = cos, g = sin, evaluated exactly.
    """
    rho0: float
    f_cos: tuple[float, ...] = (0.0, 1.0)
    f_sin: tuple[float, ...] = ()
    g_cos: tuple[float, ...] = ()
    g_sin: tuple[float, ...] = (0.0, 1.0)
    kind: str = CIRCULAR
    label: dict[str, object] = field(default_factory=dict)

    def f(self, psi, order: int = 0) -> np.ndarray:
        psi = np.asarray(psi, dtype=float)
        if self.kind == CIRCULAR:
            return (np.cos(psi), -np.sin(psi), -np.cos(psi))[order]
        return _series(np.asarray(self.f_cos), np.asarray(self.f_sin), psi, order)

    def g(self, psi, order: int = 0) -> np.ndarray:
        psi = np.asarray(psi, dtype=float)
        if self.kind == CIRCULAR:
            return (np.sin(psi), np.cos(psi), -np.sin(psi))[order]
        return _series(np.asarray(self.g_cos), np.asarray(self.g_sin), psi, order)

    def polar(self, psi) -> ProfilePolar:
        psi = np.asarray(psi, dtype=float)
        if self.kind == CIRCULAR:
            zero = np.zeros_like(psi)
            return ProfilePolar(np.full_like(psi, self.rho0), zero, zero, np.cos(psi), np.sin(psi),
                                np.ones_like(psi), zero)
        f, df, ddf = (self.f(psi, k) for k in range(3))
        g, dg, ddg = (self.g(psi, k) for k in range(3))
        P = f * f + g * g
        R = np.sqrt(P)
        dot = f * df + g * dg
        W = f * dg - g * df
        dW = f * ddg - g * ddf
        r = self.rho0 * R
        dr = self.rho0 * dot / R
        ddr = self.rho0 * ((df * df + dg * dg + f * ddf + g * ddg) / R - dot * dot / R ** 3)
        dphi = W / P
        ddphi = dW / P - W * 2.0 * dot / P ** 2
        return ProfilePolar(r, dr, ddr, f / R, g / R, dphi, ddphi)

    def points(self, psi) -> np.ndarray:
        """(n, 2) array of rho0 (f, g)."""
        return self.rho0 * np.column_stack([self.f(psi), self.g(psi)])

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "rho0": self.rho0,
            "f_cos": list(self.f_cos),
            "f_sin": list(self.f_sin),
            "g_cos": list(self.g_cos),
            "g_sin": list(self.g_sin),
            **self.label,
        }


def _segments_cross(p: np.ndarray) -> bool:
    """True if any two non-adjacent edges of the closed polygon p intersect."""
    a = p
    b = np.roll(p, -1, axis=0)
    n = len(p)

    def orient(o, u, v):
        return (u[..., 0] - o[..., 0]) * (v[..., 1] - o[..., 1]) - (u[..., 1] - o[..., 1]) * (v[..., 0] - o[..., 0])

    A, B = a[:, None, :], b[:, None, :]
    C, D = a[None, :, :], b[None, :, :]
    d1 = orient(A, B, C)
    d2 = orient(A, B, D)
    d3 = orient(C, D, A)
    d4 = orient(C, D, B)
    hit = (d1 * d2 < 0) & (d3 * d4 < 0)
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    gap = np.abs(i - j)
    hit &= (gap > 1) & (gap < n - 1)
    return bool(np.any(hit))


def validate_profile(profile: TubeProfile, n_grid: int = PROFILE_GRID) -> TubeProfile:
    if not profile.rho0 > 0.0:
        raise ProfileNotSimpleError(f"rho0 must be positive, got {profile.rho0}")
    if profile.kind == CIRCULAR:
        return profile
    psi = np.linspace(0.0, TWO_PI, n_grid, endpoint=False)
    radius2 = profile.f(psi) ** 2 + profile.g(psi) ** 2
    if float(np.min(radius2)) < 1e-20:
        k = int(np.argmin(radius2))
        raise ProfileNotSimpleError(f"(f, g) passes through the origin near psi={psi[k]:.6g}")
    if _segments_cross(profile.points(psi)):
        raise ProfileNotSimpleError("profile curve intersects itself")
    return profile


def circular_profile(rho0: float) -> TubeProfile:
    return validate_profile(TubeProfile(rho0=float(rho0), kind=CIRCULAR))


def fourier_profile(
    rho0: float,
    f_cos: Sequence[float] = (),
    f_sin: Sequence[float] = (),
    g_cos: Sequence[float] = (),
    g_sin: Sequence[float] = (),
) -> TubeProfile:
    """f = sum f_cos[k] cos k psi + f_sin[k] sin k psi, likewise g; index k starts at 0."""
    return validate_profile(TubeProfile(
        rho0=float(rho0),
        f_cos=tuple(float(c) for c in f_cos),
        f_sin=tuple(float(c) for c in f_sin),
        g_cos=tuple(float(c) for c in g_cos),
        g_sin=tuple(float(c) for c in g_sin),
        kind=GENERALIZED,
    ))


def lobed_profile(rho0: float, amplitude: float = 0.3, lobes: int = 3) -> TubeProfile:
    """f = (1 + A cos(n psi)) cos psi, g = (1 + A cos(n psi)) sin psi, as an exact Fourier series."""
    n = int(lobes)
    size = n + 2
    f_cos = np.zeros(size)
    g_sin = np.zeros(size)
    f_cos[1] += 1.0
    g_sin[1] += 1.0
    f_cos[n + 1] += 0.5 * amplitude
    f_cos[abs(n - 1)] += 0.5 * amplitude
    g_sin[n + 1] += 0.5 * amplitude
    # sin((1 - n) psi) = -sin((n - 1) psi)
    if n > 1:
        g_sin[n - 1] -= 0.5 * amplitude
    elif n == 0:
        g_sin[1] += 0.5 * amplitude
    return validate_profile(TubeProfile(
        rho0=float(rho0),
        f_cos=tuple(float(c) for c in f_cos),
        g_sin=tuple(float(c) for c in g_sin),
        kind=GENERALIZED,
        label={"lobes": n, "amplitude": float(amplitude)},
    ))


# ── Induced metric ───────────────────────────────────────────────────────────


class MetricValues(NamedTuple):
    E: np.ndarray
    F: np.ndarray
    G: np.ndarray
    E_s: np.ndarray
    E_psi: np.ndarray
    F_s: np.ndarray
    F_psi: np.ndarray
    G_s: np.ndarray
    G_psi: np.ndarray


CoefficientFn = Callable[[np.ndarray, np.ndarray], MetricValues]


@dataclass(frozen=True)
class InducedMetric2D:
    """First fundamental form E ds^2 + 2F ds dpsi + G dpsi^2 of a tube, with first partials.

    s_period is set for tubes about closed curves; otherwise s must stay inside s_range.
    """
    coefficients: CoefficientFn
    s_period: float | None
    s_range: tuple[float, float]
    s_independent: bool
    psi_period: float = TWO_PI
    name: str = "tube"
    info: dict[str, object] = field(default_factory=dict)

    def at(self, s, psi) -> MetricValues:
        s, psi = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(psi, dtype=float))
        return self.coefficients(s, psi)

    def E(self, s, psi) -> np.ndarray:
        return self.at(s, psi).E

    def F(self, s, psi) -> np.ndarray:
        return self.at(s, psi).F

    def G(self, s, psi) -> np.ndarray:
        return self.at(s, psi).G

    def sample_grid(self, n_s: int, n_psi: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.s_range
        s = np.linspace(lo, hi, n_s, endpoint=self.s_period is None)
        psi = np.linspace(0.0, self.psi_period, n_psi, endpoint=False)
        return s, psi

    def grid_frame(self, n_s: int, n_psi: int) -> pd.DataFrame:
        s, psi = self.sample_grid(n_s, n_psi)
        S, P = np.meshgrid(s, psi, indexing="ij")
        v = self.at(S, P)
        return pd.DataFrame({
            "s": S.ravel(),
            "psi": P.ravel(),
            "E": v.E.ravel(),
            "F": v.F.ravel(),
            "G": v.G.ravel(),
        })


def validate_metric(metric: InducedMetric2D, grid: tuple[int, int] = VALIDATION_GRID) -> float:
    """Smallest EG - F^2 on the grid; raises TubeDegenerateError if the form is not positive there."""
    s, psi = metric.sample_grid(*grid)
    S, P = np.meshgrid(s, psi, indexing="ij")
    v = metric.at(S, P)
    det = v.E * v.G - v.F * v.F
    if not (np.all(np.isfinite(det)) and np.all(v.E > 0) and np.all(v.G > 0) and np.all(det > 0)):
        bad = np.unravel_index(int(np.nanargmin(np.where(np.isfinite(det), det, -np.inf))), det.shape)
        raise TubeDegenerateError(
            f"EG - F^2 = {float(det[bad]):.3e} at s={float(S[bad]):.6g}, psi={float(P[bad]):.6g} on {metric.name}"
        )
    return float(np.min(det))


def inverse_form(E, F, G) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(g^ss, g^spsi, g^psipsi) of [[E, F], [F, G]]."""
    det = E * G - F * F
    if np.any(det <= 1e-14):
        raise DegenerateMetricError(f"(EG - F^2 = {float(np.min(det)):.3e})")
    return G / det, -F / det, E / det


ScalarOrFn = Union[float, Callable[[np.ndarray], np.ndarray]]


def _as_fn(value: ScalarOrFn) -> tuple[Callable[[np.ndarray], np.ndarray], bool]:
    if callable(value):
        return value, False
    c = float(value)
    return (lambda s: np.full(np.shape(s), c)), True


def _fd_derivative(fn: Callable[[np.ndarray], np.ndarray]) -> Callable[[np.ndarray], np.ndarray]:
    h = CURVATURE_FD_STEP
    return lambda s: (fn(s + h) - fn(s - h)) / (2.0 * h)


def _line_element(K0: int, k1, k2, dk1, dk2, polar: ProfilePolar) -> MetricValues:
    """E, F, G and partials from J_s = (F(r) - k1 G(r) cos phi) T + k2 G(r) e_phi and
    d(beta)/dpsi = r' gamma' + G(r) phi' e_phi."""
    Fr, Gr, dFr, dGr = scale_functions(K0, polar.r)
    c, s_ = polar.cos_phi, polar.sin_phi
    r1, r2, p1, p2 = polar.dr, polar.ddr, polar.dphi, polar.ddphi
    A = Fr - k1 * Gr * c
    E = A * A + k2 * k2 * Gr * Gr
    F = k2 * Gr * Gr * p1
    G = r1 * r1 + Gr * Gr * p1 * p1

    A_s = -dk1 * Gr * c
    E_s = 2.0 * A * A_s + 2.0 * k2 * dk2 * Gr * Gr
    F_s = dk2 * Gr * Gr * p1
    G_s = np.zeros_like(G)

    Fr_psi = dFr * r1
    Gr_psi = dGr * r1
    A_psi = Fr_psi - k1 * (Gr_psi * c - Gr * s_ * p1)
    E_psi = 2.0 * A * A_psi + 2.0 * k2 * k2 * Gr * Gr_psi
    F_psi = k2 * (2.0 * Gr * Gr_psi * p1 + Gr * Gr * p2)
    G_psi = 2.0 * r1 * r2 + 2.0 * Gr * Gr_psi * p1 * p1 + 2.0 * Gr * Gr * p1 * p2
    return MetricValues(E, F, G, E_s, E_psi, F_s, F_psi, G_s, G_psi)


def tube_metric(
    K0: SpaceFormTag | int,
    k1: ScalarOrFn,
    k2: ScalarOrFn,
    profile: TubeProfile,
    dk1: Callable | None = None,
    dk2: Callable | None = None,
    s_period: float | None = None,
    s_range: tuple[float, float] | None = None,
    validate: bool = True,
    name: str = "tube",
) -> InducedMetric2D:
    """Induced metric of the (generalized) tube of the given profile about a curve with curvatures k1(s), k2(s)."""
    K0 = _k0(K0)
    validate_profile(profile)
    k1_fn, k1_const = _as_fn(k1)
    k2_fn, k2_const = _as_fn(k2)
    dk1_fn = dk1 or ((lambda s: np.zeros(np.shape(s))) if k1_const else _fd_derivative(k1_fn))
    dk2_fn = dk2 or ((lambda s: np.zeros(np.shape(s))) if k2_const else _fd_derivative(k2_fn))

    def coefficients(s: np.ndarray, psi: np.ndarray) -> MetricValues:
        return _line_element(K0, k1_fn(s), k2_fn(s), dk1_fn(s), dk2_fn(s), profile.polar(psi))

    if s_range is None:
        s_range = (0.0, s_period if s_period is not None else TWO_PI)
    metric = InducedMetric2D(
        coefficients=coefficients,
        s_period=s_period,
        s_range=(float(s_range[0]), float(s_range[1])),
        s_independent=k1_const and k2_const,
        name=name,
        info={"K0": K0, "profile": profile.to_dict(),
              **({"k1": float(k1), "k2": float(k2)} if k1_const and k2_const else {})},
    )
    if validate:
        if profile.kind == CIRCULAR:
            F0, G0 = spaceform_scale(K0, profile.rho0)
            s_grid, _ = metric.sample_grid(VALIDATION_GRID[0], 1)
            if F0 <= 0.0 or float(np.max(np.abs(k1_fn(s_grid)))) * G0 >= F0:
                raise TubeDegenerateError(f"|k1| G0 >= F0 (F0={F0:.6g}, G0={G0:.6g}) on {name}")
        validate_metric(metric)
    return metric


def circular_tube_metric(
    K0: SpaceFormTag | int,
    k1_fn: ScalarOrFn,
    k2_fn: ScalarOrFn,
    rho0: float,
    dk1: Callable | None = None,
    dk2: Callable | None = None,
    s_period: float | None = None,
    validate: bool = True,
) -> InducedMetric2D:
    """E = (F0 - k1 G0 cos psi)^2 + k2^2 G0^2, F = k2 G0^2, G = G0^2."""
    return tube_metric(K0, k1_fn, k2_fn, circular_profile(rho0), dk1, dk2, s_period,
                       validate=validate, name="circular_tube")


def generalized_tube_metric(
    K0: SpaceFormTag | int,
    k1: ScalarOrFn,
    k2: ScalarOrFn,
    profile: TubeProfile,
    s_period: float | None = None,
    validate: bool = True,
) -> InducedMetric2D:
    return tube_metric(K0, k1, k2, profile, s_period=s_period, validate=validate, name="generalized_tube")


# ── Curvature scalars of the torus knots, in closed form ─────────────────────


def hopf_curvatures(alpha: float, beta: float, eta0: float) -> tuple[float, float]:
    """k1 = (alpha^2 - beta^2) sin cos / p^2, k2 = alpha beta / p^2 for (eta0, alpha t, beta t) on S^3."""
    s, c = math.sin(eta0), math.cos(eta0)
    p2 = alpha * alpha * s * s + beta * beta * c * c
    return (alpha * alpha - beta * beta) * s * c / p2, alpha * beta / p2


def ellipsoid_curvatures(a: float, b: float, alpha: float, beta: float, eta0: float) -> tuple[float, float]:
    s, c = math.sin(eta0), math.cos(eta0)
    p2 = a * a * alpha * alpha * s * s + b * b * beta * beta * c * c
    q = math.sqrt(a * a * c * c + b * b * s * s)
    k1 = (b * b * beta * beta - a * a * alpha * alpha) / p2 * c * s / q
    k2 = a * b * alpha * beta / (p2 * q)
    return k1, k2
