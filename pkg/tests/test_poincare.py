"""Section crossings, seeds and the regularity classifier."""
from __future__ import annotations

import math

import numpy as np
import pytest

from src.errors import InsufficientPointsError, TubeDegenerateError
from src.poincare import (
    SectionConfig,
    SectionPoint,
    default_seed_grid,
    ellipse_tube_metric,
    momentum_drift,
    orbit_residual,
    points_frame,
    regularity_score,
    section,
    section_crossings,
    separatrix_seeds,
    unstable_equator,
)


def _points(psi, p, seed=0):
    return [SectionPoint(float(a), float(b), seed, k, 0.5, 0.5, 0.0, float(k)) for k, (a, b) in enumerate(zip(psi, p))]


class _DenseSolution:
    """Solver output stand-in: steps at t, s given in closed form, other components zero."""

    def __init__(self, s_fn, t):
        self.t = np.asarray(t, dtype=float)
        self._s = s_fn

    def sol(self, t):
        t = np.asarray(t, dtype=float)
        zero = np.zeros_like(t)
        return np.stack([self._s(t), zero, zero, zero])


def test_ellipse_tube_metric():
    torus = ellipse_tube_metric(2.0, 2.0, 1.0)
    assert torus.s_independent
    assert torus.s_period == pytest.approx(4.0 * math.pi)
    v = torus.at(1.0, 0.0)
    assert (float(v.E), float(v.F), float(v.G)) == pytest.approx((0.25, 0.0, 1.0))
    ellipse = ellipse_tube_metric(2.0, 2.5, 1.0)
    assert not ellipse.s_independent
    with pytest.raises(TubeDegenerateError):
        ellipse_tube_metric(2.0, 2.5, 2.0)


def test_default_seed_grid():
    seeds = default_seed_grid()
    assert len(seeds) == 10
    assert [p for _, p in seeds] == pytest.approx([-0.9, -0.7, -0.5, -0.3, -0.1, 0.1, 0.3, 0.5, 0.7, 0.9])
    assert all(psi == 0.0 for psi, _ in seeds)
    assert default_seed_grid(1.0, [0.2]) == [(1.0, 0.2)]


def test_separatrix_seeds_sit_next_to_the_inner_equator():
    torus = ellipse_tube_metric(2.0, 2.0, 1.0)
    psi_star = unstable_equator(torus)
    assert min(psi_star, 2.0 * math.pi - psi_star) < 1e-6
    seeds = separatrix_seeds(torus)
    assert len(seeds) == 4
    assert all(abs(psi - 0.05) < 1e-6 for psi, _ in seeds)


def test_section_config_validation():
    with pytest.raises(ValueError):
        SectionConfig(section_period=1.0, seeds=((0.0, 0.1),), n_crossings=0)
    with pytest.raises(ValueError):
        SectionConfig(section_period=1.0, seeds=((0.0, 0.1),), direction=0)
    with pytest.raises(ValueError):
        SectionConfig(section_period=0.0, seeds=((0.0, 0.1),))


def test_torus_section_is_regular():
    torus = ellipse_tube_metric(2.0, 2.0, 1.0)
    config = SectionConfig(section_period=torus.s_period, seeds=((0.0, -0.5), (0.0, 0.9)), n_crossings=60)
    run = section(torus, config)
    assert run.complete
    assert len(run.points) == 120
    assert [pt.seed_index for pt in run.points[:60]] == [0] * 60
    assert all(abs(pt.s_offset) < 1e-10 for pt in run.points)
    assert all(abs(pt.H - 0.5) < 1e-9 for pt in run.points)
    assert all(pt.p_s > 0 for pt in run.points)
    assert max(momentum_drift(run).values()) < 1e-12
    scores = regularity_score(run)
    assert [s.seed_index for s in scores] == [0, 1]
    assert all(s.regular for s in scores)
    assert all(s.mode == "rotational" for s in scores)
    frame = points_frame(run.points)
    assert list(frame.columns) == ["seed_index", "crossing_index", "psi", "p_psi", "p_s", "H"]
    assert frame["psi"].between(0.0, 2.0 * math.pi).all()


@pytest.mark.slow
def test_ellipse_separatrix_breaks_up():
    metric = ellipse_tube_metric(2.0, 2.5, 1.0)
    seeds = tuple(separatrix_seeds(metric))
    run = section(metric, SectionConfig(section_period=metric.s_period, seeds=seeds, n_crossings=400))
    scores = regularity_score(run)
    assert any(not s.regular for s in scores)
    assert max(s.residual for s in scores if math.isfinite(s.residual)) > 1e-2
    assert max(momentum_drift(run).values()) > 1e-3


def test_orbit_residual_of_smooth_curves():
    rng = np.random.default_rng(7)
    psi = rng.uniform(0.0, 2.0 * math.pi, 200)
    residual, mode, order = orbit_residual(psi, 0.5 + 0.1 * np.sin(psi) + 0.05 * np.cos(3 * psi))
    assert mode == "rotational"
    assert residual < 1e-10
    theta = rng.uniform(0.0, 2.0 * math.pi, 200)
    residual, mode, _ = orbit_residual(np.mod(3.0 + 0.4 * np.cos(theta), 2.0 * math.pi), 0.2 * np.sin(theta))
    assert mode == "librating"
    assert residual < 1e-8


def test_scattered_points_are_irregular():
    rng = np.random.default_rng(11)
    pts = _points(rng.uniform(0.0, 2.0 * math.pi, 200), rng.uniform(-0.5, 0.5, 200))
    (score,) = regularity_score(pts)
    assert not score.regular
    assert score.n_points == 200


def test_too_few_points_raise():
    with pytest.raises(InsufficientPointsError):
        regularity_score(_points(np.linspace(0.0, 6.0, 10), np.full(10, 0.3)))


@pytest.mark.slow
def test_torus_default_grid_is_regular():
    torus = ellipse_tube_metric(2.0, 2.0, 1.0)
    run = section(torus, SectionConfig(section_period=torus.s_period, seeds=tuple(default_seed_grid())))
    assert run.complete
    assert len(run.points) == 10 * 400
    assert max(momentum_drift(run).values()) < 1e-9
    assert all(s.regular and s.residual < 1e-3 for s in regularity_score(run))


def test_crossings_inside_one_solver_step_are_found():
    dip = _DenseSolution(lambda t: 0.2 - 0.5 * np.sin(np.pi * t / 10.0), [0.0, 10.0])
    found = section_crossings(dip, 1.0)
    t_down = 10.0 / math.pi * math.asin(0.4)
    assert [d for _, _, d in found] == [-1, 1]
    assert [b for _, b, _ in found] == [0.0, 0.0]
    assert found[0][0] == pytest.approx(t_down, abs=1e-12)
    assert found[1][0] == pytest.approx(10.0 - t_down, abs=1e-12)


def test_crossings_over_several_periods_are_ordered():
    ramp = _DenseSolution(lambda t: 0.5 + 0.9 * t, [0.0, 1.0, 2.5, 4.0])
    found = section_crossings(ramp, 1.0)
    assert [b for _, b, _ in found] == [1.0, 2.0, 3.0, 4.0]
    assert [t for t, _, _ in found] == pytest.approx([(b - 0.5) / 0.9 for b in (1.0, 2.0, 3.0, 4.0)], abs=1e-12)
    assert all(d == 1 for _, _, d in found)


def test_downward_section_skips_the_seed_itself():
    torus = ellipse_tube_metric(2.0, 2.0, 1.0)
    config = SectionConfig(section_period=torus.s_period, seeds=((0.0, 0.5),), n_crossings=20, direction=-1)
    run = section(torus, config)
    assert run.complete
    assert len(run.points) == 20
    assert all(pt.p_s < 0 for pt in run.points)
    assert run.points[0].tau > 1.0
    assert all(abs(pt.s_offset) < 1e-10 for pt in run.points)


def test_non_convex_librating_orbit_is_regular():
    rng = np.random.default_rng(5)
    theta = rng.uniform(0.0, 2.0 * math.pi, 400)
    r = 0.3 * (1.0 + 0.4 * np.cos(3.0 * theta))
    residual, mode, _ = orbit_residual(2.0 + r * np.cos(theta), r * np.sin(theta))
    assert mode == "librating"
    assert residual < 1e-6
