"""Arc length, Frenet frames and curvature scalars against closed forms."""
from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.special import ellipe

from src.curves import (
    ParamCurve,
    arclength_reparam,
    circle,
    constancy_check,
    curvature_profile,
    ellipse,
    ellipsoid_curve,
    frame_at_t,
    frenet_evolve,
    frenet_residuals,
    helix,
    helix_cylindrical,
    hopf_curve,
    straight_line,
    wavy_ellipsoid_curve,
)
from src.errors import VanishingCurvatureError
from src.expressions import expression_curve, user_chart
from src.manifolds import inner
from src.spaceform_tubes import ellipsoid_curvatures, hopf_curvatures

CYLINDRICAL = [["1", "0", "0"], ["0", "x1^2", "0"], ["0", "0", "1"]]


def test_circle_length_and_curvature():
    curve = circle(2.0)
    table = arclength_reparam(curve)
    assert table.length == pytest.approx(4.0 * math.pi, rel=1e-12)
    fd = frenet_evolve(curve, [1.3], table)[0]
    assert fd.k1 == pytest.approx(0.5, abs=1e-10)
    assert fd.k2 == pytest.approx(0.0, abs=1e-9)


def test_ellipse_perimeter_matches_elliptic_integral():
    table = arclength_reparam(ellipse(2.0, 2.5))
    expected = 4.0 * 2.5 * ellipe(1.0 - (2.0 / 2.5) ** 2)
    assert table.length == pytest.approx(expected, rel=1e-10)


def test_arc_length_inverse_round_trip():
    table = arclength_reparam(ellipse(2.0, 2.5))
    for s in (0.0, 1.7, 5.2, table.length - 1e-3):
        assert table.s_of_t(table.t_of_s(s)) == pytest.approx(s, abs=1e-10)


def test_closed_curve_arc_length_wraps():
    table = arclength_reparam(circle(1.0))
    assert table.t_of_s(2.0 * math.pi + 1.0) == pytest.approx(2.0 * math.pi + 1.0, abs=1e-10)


def test_ellipse_curvature_at_vertices():
    curve = ellipse(2.0, 2.5)
    assert frame_at_t(curve, 0.0).k1 == pytest.approx(2.0 / 2.5 ** 2, abs=1e-9)
    assert frame_at_t(curve, 0.5 * math.pi).k1 == pytest.approx(2.5 / 2.0 ** 2, abs=1e-9)


def test_helix_curvature_and_torsion():
    a, c = 1.0, 0.5
    fd = frame_at_t(helix(a, c), 0.8)
    assert fd.k1 == pytest.approx(a / (a * a + c * c), abs=1e-9)
    assert fd.k2 == pytest.approx(c / (a * a + c * c), abs=1e-7)


def test_cylindrical_helix_matches_cartesian():
    a, c = 1.0, 0.5
    cart = frame_at_t(helix(a, c), 0.8)
    cyl = frame_at_t(helix_cylindrical(a, c), 0.8)
    assert cyl.k1 == pytest.approx(cart.k1, abs=1e-9)
    assert cyl.k2 == pytest.approx(cart.k2, abs=1e-7)


@pytest.mark.parametrize("alpha, beta, eta0", [(5.0, 2.0, math.pi / 4), (3.0, 2.0, math.pi / 4), (2.0, 3.0, 0.6), (3.0, 1.0, 0.3)])
def test_hopf_curvatures_match_closed_form(alpha, beta, eta0):
    fd = frame_at_t(hopf_curve(alpha, beta, eta0), 0.4)
    k1, k2 = hopf_curvatures(alpha, beta, eta0)
    assert fd.k1 == pytest.approx(abs(k1), abs=1e-8)
    assert abs(fd.k2) == pytest.approx(abs(k2), abs=1e-8)


def test_hopf_fibre_is_a_great_circle():
    assert hopf_curvatures(1.0, 1.0, 0.3)[0] == 0.0
    with pytest.raises(VanishingCurvatureError):
        frame_at_t(hopf_curve(1.0, 1.0, 0.3), 0.4)


def test_ellipsoid_curvatures_match_closed_form():
    a, b, alpha, beta, eta0 = 2.0, 1.0, 5.0, 2.0, math.pi / 4
    fd = frame_at_t(ellipsoid_curve(a, b, alpha, beta, eta0), 1.1)
    k1, k2 = ellipsoid_curvatures(a, b, alpha, beta, eta0)
    assert fd.k1 == pytest.approx(abs(k1), abs=1e-8)
    assert abs(fd.k2) == pytest.approx(abs(k2), abs=1e-8)


def test_frame_is_orthonormal():
    curve = ellipsoid_curve(2.0, 1.0, 5.0, 2.0, 0.7)
    fd = frame_at_t(curve, 0.9)
    vecs = (fd.T, fd.N, fd.B)
    gram = np.array([[inner(curve.chart, fd.x, u, v) for v in vecs] for u in vecs])
    assert np.allclose(gram, np.eye(3), atol=1e-10)


def test_frenet_equations_hold_on_the_ellipse():
    res = frenet_residuals(ellipse(2.0, 2.5), 3.0)
    assert max(res) < 1e-6


def test_torus_knots_have_constant_curvature():
    assert constancy_check(hopf_curve(5.0, 2.0, math.pi / 4), n_samples=16).constant
    assert constancy_check(ellipsoid_curve(2.0, 1.0, 5.0, 2.0, math.pi / 4), n_samples=16).constant


def test_wavy_curve_and_ellipse_are_not_constant():
    assert not constancy_check(wavy_ellipsoid_curve(2.0, 1.0, 5.0, 2.0, math.pi / 4), n_samples=16).constant
    assert not constancy_check(ellipse(2.0, 2.5), n_samples=16).constant


def test_curvature_profile_is_periodic():
    prof = curvature_profile(ellipse(2.0, 2.5), n=128)
    assert prof.k1(0.0) == pytest.approx(prof.k1(prof.length), abs=1e-12)
    assert float(prof.k1(0.0)) == pytest.approx(2.0 / 2.5 ** 2, abs=1e-9)


def test_curvature_profile_needs_closed_curve():
    with pytest.raises(ValueError):
        curvature_profile(helix(1.0, 0.5))


def test_straight_line_needs_reference_normal():
    line = straight_line((0.0, 0.0, 1.0), length=2.0)
    with pytest.raises(VanishingCurvatureError):
        frame_at_t(line, 0.5)
    fd = frame_at_t(line, 0.5, allow_geodesic=True)
    assert fd.k1 == 0.0 and fd.k2 == 0.0
    assert abs(float(fd.N @ fd.T)) < 1e-14


def test_expression_curve_on_user_metric():
    chart = user_chart(CYLINDRICAL)
    curve = expression_curve(chart, ["2", "t", "0"], (0.0, 2.0 * math.pi), period=2.0 * math.pi)
    assert arclength_reparam(curve).length == pytest.approx(4.0 * math.pi, rel=1e-9)
    fd = frame_at_t(curve, 0.3)
    assert fd.k1 == pytest.approx(0.5, abs=1e-6)
    assert fd.k2 == pytest.approx(0.0, abs=1e-6)


@pytest.mark.parametrize("a, b, alpha, beta", [(1.0, 1.5, 3.0, 2.0), (1.5, 1.0, 2.0, 5.0)])
def test_ellipsoid_curvatures_on_other_axes(a, b, alpha, beta):
    curve = ellipsoid_curve(a, b, alpha, beta, math.pi / 4)
    k1, k2 = ellipsoid_curvatures(a, b, alpha, beta, math.pi / 4)
    for fd in frenet_evolve(curve, [0.0, 0.9, 2.3]):
        assert fd.k1 == pytest.approx(abs(k1), abs=1e-8)
        assert abs(fd.k2) == pytest.approx(abs(k2), abs=1e-8)


def test_hopf_curve_length():
    table = arclength_reparam(hopf_curve(5.0, 2.0, math.pi / 4))
    assert table.length == pytest.approx(2.0 * math.pi * math.sqrt(29.0 / 2.0), rel=1e-12)


def test_arc_length_does_not_depend_on_the_parameterization():
    base = ellipse(2.0, 2.5)

    def warp(u):
        return u + 0.3 * math.sin(u)

    warped = ParamCurve(
        chart=base.chart,
        pos_fn=lambda u: base.position(warp(u)),
        vel_fn=lambda u: base.velocity(warp(u)) * (1.0 + 0.3 * math.cos(u)),
        t_range=(0.0, 2.0 * math.pi),
        period=2.0 * math.pi,
        name="warped_ellipse",
    )
    plain, table = arclength_reparam(base), arclength_reparam(warped)
    assert table.length == pytest.approx(plain.length, rel=1e-11)
    for u in (0.4, 2.0, 5.1):
        assert table.s_of_t(u) == pytest.approx(plain.s_of_t(warp(u)), abs=1e-10)
