"""Charts, Christoffel symbols, curvature and the metric cross product."""
from __future__ import annotations

import math

import numpy as np
import pytest

from src.errors import ChartDomainError, DegenerateMetricError, DegeneratePlaneError
from src.manifolds import (
    FINITE_DIFFERENCE,
    ChartMetric,
    christoffel_at,
    cross,
    ellipsoid3_degenerate,
    euclidean3,
    euclidean3_cylindrical,
    hyperbolic3_halfspace,
    inner,
    metric_at,
    norm,
    riemann_at,
    sectional_curvature,
    sphere3_hopf,
)

PLANES = [
    (np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])),
    (np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.0, 1.0])),
    (np.array([0.3, 1.0, -0.2]), np.array([0.0, 0.5, 2.0])),
]


@pytest.mark.parametrize("chart, x, K0", [
    (euclidean3(), (0.3, -1.0, 2.0), 0.0),
    (euclidean3_cylindrical(), (1.5, 0.4, -0.2), 0.0),
    (sphere3_hopf(), (0.6, 1.0, 2.0), 1.0),
    (hyperbolic3_halfspace(), (0.1, -0.3, 0.7), -1.0),
])
def test_space_forms_have_constant_sectional_curvature(chart, x, K0):
    for u, v in PLANES:
        assert sectional_curvature(chart, x, u, v) == pytest.approx(K0, abs=1e-10)


@pytest.mark.parametrize("chart, x", [
    (sphere3_hopf().with_mode(FINITE_DIFFERENCE), (0.6, 1.0, 2.0)),
    (hyperbolic3_halfspace().with_mode(FINITE_DIFFERENCE), (0.1, -0.3, 0.7)),
])
def test_finite_difference_mode_matches_constant_curvature(chart, x):
    u, v = PLANES[2]
    expected = chart.space_form.K0
    assert sectional_curvature(chart, x, u, v) == pytest.approx(expected, abs=1e-5)


def test_riemann_symmetries():
    chart = ellipsoid3_degenerate(2.0, 1.0)
    _, low = riemann_at(chart, (0.5, 0.1, 0.2))
    assert np.allclose(low, -np.swapaxes(low, 0, 1), atol=1e-12)
    assert np.allclose(low, -np.swapaxes(low, 2, 3), atol=1e-12)
    assert np.allclose(low, np.transpose(low, (2, 3, 0, 1)), atol=1e-12)
    bianchi = low + np.transpose(low, (0, 2, 3, 1)) + np.transpose(low, (0, 3, 1, 2))
    assert np.max(np.abs(bianchi)) < 1e-12


def test_cylindrical_christoffel_symbols():
    gamma = christoffel_at(euclidean3_cylindrical(), (2.0, 0.3, 0.0))
    assert gamma[0, 1, 1] == pytest.approx(-2.0)
    assert gamma[1, 0, 1] == pytest.approx(0.5)
    assert gamma[1, 1, 0] == pytest.approx(0.5)


def test_analytic_and_finite_difference_christoffels_agree():
    chart = ellipsoid3_degenerate(1.5, 0.8)
    fd_chart = chart.with_mode(FINITE_DIFFERENCE)
    rng = np.random.default_rng(5)
    for _ in range(100):
        x = (rng.uniform(0.2, 1.37), rng.uniform(-math.pi, math.pi), rng.uniform(-math.pi, math.pi))
        assert np.max(np.abs(christoffel_at(chart, x) - christoffel_at(fd_chart, x))) < 1e-7, x


def test_ellipsoid_chart_with_unit_axes_is_the_round_sphere():
    assert ellipsoid3_degenerate(1.0, 1.0).space_form.K0 == 1
    assert ellipsoid3_degenerate(2.0, 1.0).space_form is None


def test_cross_product_is_orthonormal_and_right_handed():
    chart = sphere3_hopf()
    x = (0.6, 0.0, 0.0)
    g, _ = metric_at(chart, x)
    u = np.array([1.0, 0.0, 0.0])
    v = np.array([0.0, 1.0 / math.sin(0.6), 0.0])
    w = cross(chart, x, u, v)
    assert inner(chart, x, w, u) == pytest.approx(0.0, abs=1e-14)
    assert inner(chart, x, w, v) == pytest.approx(0.0, abs=1e-14)
    assert norm(chart, x, w) == pytest.approx(1.0)
    assert np.linalg.det(np.column_stack([u, v, w])) > 0


def test_metric_outside_domain_raises():
    with pytest.raises(ChartDomainError):
        metric_at(hyperbolic3_halfspace(), (0.0, 0.0, -1.0))
    with pytest.raises(ChartDomainError):
        metric_at(sphere3_hopf(), (2.0, 0.0, 0.0))


def test_indefinite_metric_raises():
    chart = ChartMetric(name="bad", metric_fn=lambda x: np.diag([1.0, -1.0, 1.0]))
    with pytest.raises(DegenerateMetricError):
        metric_at(chart, (0.0, 0.0, 0.0))


def test_degenerate_plane_raises():
    u = np.array([1.0, 2.0, 3.0])
    with pytest.raises(DegeneratePlaneError):
        sectional_curvature(euclidean3(), (0.0, 0.0, 0.0), u, 2.0 * u)


@pytest.mark.parametrize("chart, low, high, K0", [
    (euclidean3(), (-3.0, -3.0, -3.0), (3.0, 3.0, 3.0), 0.0),
    (sphere3_hopf(), (0.1, -3.0, -3.0), (1.45, 3.0, 3.0), 1.0),
    (hyperbolic3_halfspace(), (-2.0, -2.0, 0.2), (2.0, 2.0, 3.0), -1.0),
])
def test_random_planes_in_space_forms(chart, low, high, K0):
    rng = np.random.default_rng(11)
    for _ in range(100):
        x = rng.uniform(low, high)
        u = rng.normal(size=3)
        v = rng.normal(size=3)
        v -= (u @ v) / (u @ u) * u
        assert sectional_curvature(chart, x, u, v) == pytest.approx(K0, abs=1e-8)


def test_ellipsoid_metric_value():
    g, ginv = metric_at(ellipsoid3_degenerate(1.0, 1.5), (math.pi / 4, 0.0, 0.0))
    assert np.allclose(g, np.diag([1.625, 0.5, 1.125]), atol=1e-14)
    assert np.allclose(g @ ginv, np.eye(3), atol=1e-14)


def test_hopf_christoffel_symbols_at_the_clifford_torus():
    gamma = christoffel_at(sphere3_hopf(), (math.pi / 4, 0.3, 1.2))
    assert gamma[1, 0, 1] == pytest.approx(1.0, abs=1e-14)
    assert gamma[1, 1, 0] == pytest.approx(1.0, abs=1e-14)
    assert gamma[2, 0, 2] == pytest.approx(-1.0, abs=1e-14)


def test_hopf_riemann_does_not_depend_on_the_angles():
    chart = sphere3_hopf()
    _, ref = riemann_at(chart, (0.6, 0.0, 0.0))
    for theta, phi in ((1.0, 2.0), (-2.5, 0.4), (3.0, -1.7)):
        _, low = riemann_at(chart, (0.6, theta, phi))
        assert np.allclose(low, ref, atol=1e-14)


def test_sectional_curvature_depends_only_on_the_plane():
    chart = ellipsoid3_degenerate(2.0, 1.0)
    x = (0.5, 0.1, 0.2)
    u, v = np.array([1.0, 0.2, 0.0]), np.array([0.0, 0.5, 1.0])
    K = sectional_curvature(chart, x, u, v)
    for a, b, c, d in ((2.0, 1.0, 1.0, -3.0), (0.0, 1.0, 1.0, 0.0), (-1.0, 0.5, 0.3, 2.0)):
        assert sectional_curvature(chart, x, a * u + b * v, c * u + d * v) == pytest.approx(K, rel=1e-10)
