import math

import numpy as np
import pytest
from pydantic import ValidationError

from kernels import green
from models.errors import DegenerateCap, OutsideDomain
from models.schemas import BallGeometry, CapRange, QuadratureSpec
from quadrature import (
    cap_surface_integral, integrate_ball, integrate_ball_with_error, sphere_integral, sphere_rule,
    spherical_average, theta_jacobian, theta_map, unit_sphere_area
)
from tests.utils import cap_integral_3d
from utils.sampling import halton


@pytest.mark.parametrize("N, expected", [(2, 2 * math.pi), (3, 4 * math.pi), (4, 2 * math.pi ** 2)])
def test_unit_sphere_area(N, expected):
    assert unit_sphere_area(N) == pytest.approx(expected, rel=1e-15)

@pytest.mark.parametrize("N", [2, 3, 4, 5])
def test_sphere_rule_weights(N):
    nodes, weights = sphere_rule(N, 6)
    assert np.all(weights > 0)
    assert weights.sum() == pytest.approx(unit_sphere_area(N), rel=1e-13)
    np.testing.assert_allclose(np.linalg.norm(nodes, axis=1), 1.0, rtol=1e-14)

def test_sphere_rule_is_read_only():
    nodes, _ = sphere_rule(3, 4)
    with pytest.raises(ValueError):
        nodes[0, 0] = 2.0

@pytest.mark.parametrize(
    "geom, expected",
    [
        pytest.param(BallGeometry.unit(3), 4 * math.pi / 3, id="unit_ball"),
        pytest.param(BallGeometry.ball(2.0, 2), 4 * math.pi, id="disc_radius_2"),
        pytest.param(BallGeometry.shifted_ball(3.0, 3), 36 * math.pi, id="shifted_ball"),
    ]
)
def test_ball_volume(geom, expected, quadrature):
    result = integrate_ball_with_error(lambda Y: np.ones(len(Y)), geom, quadrature)
    assert result.value == pytest.approx(expected, rel=1e-10)
    assert result.nodes > 0

def test_second_moment(quadrature):
    # ∫_B |y|^2 dy = |S^2| / 5
    value = integrate_ball(lambda Y: np.sum(Y * Y, axis=1), BallGeometry.unit(3), quadrature)
    assert value == pytest.approx(4 * math.pi / 5, rel=1e-10)

@pytest.mark.parametrize(
    "x",
    [[0.0, 0.0, 0.0], [0.3, -0.2, 0.1], [0.0, 0.0, 0.8]],
    ids=["center", "interior", "near_boundary"]
)
def test_torsion_function(laplace_3d, quadrature, x):
    # ∫_B G_1(x, y) dy = (1 - |x|^2) / 6 in three dimensions
    x = np.asarray(x)
    geom = BallGeometry.unit(3)
    value = integrate_ball(lambda Y: green(laplace_3d, geom, x, Y), geom, quadrature, singular_at=x)
    assert value == pytest.approx((1 - x @ x) / 6, rel=1e-7)

def test_singular_point_outside_ball(quadrature):
    with pytest.raises(OutsideDomain):
        integrate_ball(lambda Y: np.ones(len(Y)), BallGeometry.unit(3), quadrature, singular_at=np.array([2.0, 0, 0]))

def test_sphere_integral_area(quadrature):
    value = sphere_integral(lambda Y: np.ones(len(Y)), np.array([1.0, 2.0, 3.0]), 2.0, quadrature)
    assert value == pytest.approx(16 * math.pi, rel=1e-12)

@pytest.mark.parametrize("r", [0.0, 0.5, 2.0])
def test_spherical_average_of_quadratic(quadrature, r):
    value = spherical_average(lambda Y: 1.0 + Y[:, 0] + np.sum(Y * Y, axis=1), r, quadrature, 3)
    assert value == pytest.approx(1.0 + r * r, rel=1e-12)

@pytest.mark.parametrize("N", [2, 3, 5])
@pytest.mark.parametrize("r", [0.3, 1.0, 2.5])
def test_spherical_average_of_constant_and_linear(quadrature, N, r):
    assert spherical_average(lambda Y: np.full(len(Y), 3.0), r, quadrature, N) == pytest.approx(3.0, abs=1e-8)
    linear = spherical_average(lambda Y: Y @ np.arange(1.0, N + 1), r, quadrature, N)
    assert linear == pytest.approx(0.0, abs=1e-8)

@pytest.mark.parametrize(
    "g",
    [lambda s: s * s, lambda s: np.maximum(0.0, -s) ** 3, np.exp],
    ids=["square", "negative_part_cubed", "exp"]
)
@pytest.mark.parametrize("N", [2, 3])
def test_jensen_for_convex_compositions(seed, g, N):
    # g∘w is only C^2 across the zero set of w
    spec = QuadratureSpec(target_rel_error=1e-5, max_subdivisions=12, abs_floor=1e-10)
    coeffs = 2 * halton(100, N + 2, seed) - 1
    for row in coeffs:
        def w(Y, row=row):
            return row[0] + Y @ row[1:N + 1] + row[N + 1] * np.sin(3 * Y[:, 0]) * np.cos(np.sum(Y, axis=1))

        for r in (0.4, 1.3):
            outer = spherical_average(lambda Y: g(w(Y)), r, spec, N)
            inner = g(spherical_average(w, r, spec, N))
            assert outer >= inner - 1e-8 - 2 * spec.target_rel_error * (abs(outer) + abs(inner))

def test_spherical_average_rejects_negative_radius(quadrature):
    with pytest.raises(ValueError):
        spherical_average(lambda Y: np.ones(len(Y)), -1.0, quadrature, 3)

def test_theta_map_lands_on_sphere():
    angles = np.array([[0.3, 1.1, 2.0], [5.0, 0.2, 0.7]])
    np.testing.assert_allclose(np.linalg.norm(theta_map(angles), axis=1), 1.0, rtol=1e-14)
    np.testing.assert_allclose(theta_jacobian(angles), np.sin(angles[:, 1]) * np.sin(angles[:, 2]) ** 2, rtol=1e-14)

@pytest.mark.parametrize(
    "x1, a, b, R",
    [(1.0, 0.0, 16.0, 8.0), (1.0, 0.5, 3.0, 8.0), (0.5, 0.0, 200.0, 100.0)],
    ids=["full_cap", "partial_cap", "large_radius"]
)
def test_cap_integral_closed_form(quadrature, x1, a, b, R):
    value = cap_surface_integral(CapRange(a=a, b=b, R=R), np.array([x1, 0.0, 0.0]), quadrature)
    assert value == pytest.approx(cap_integral_3d(x1, a, b, R), rel=1e-8)

def test_cap_integral_with_unit_weight(quadrature):
    cap = CapRange(a=0.0, b=16.0, R=8.0)
    x = np.array([1.0, 0.0, 0.0])
    weighted = cap_surface_integral(cap, x, quadrature, weight=lambda Y: np.ones(len(Y)))
    assert weighted == pytest.approx(cap_surface_integral(cap, x, quadrature), rel=1e-10)

def test_empty_cap(quadrature):
    assert cap_surface_integral(CapRange(a=2.0, b=2.0, R=8.0), np.array([1.0, 0.0, 0.0]), quadrature) == 0.0

@pytest.mark.parametrize(
    "x",
    [[1.0, 0.5, 0.0], [5.0, 0.0, 0.0], [0.0, 0.0, 0.0]],
    ids=["off_axis", "too_far", "on_boundary"]
)
def test_degenerate_cap(quadrature, x):
    with pytest.raises(DegenerateCap):
        cap_surface_integral(CapRange(a=0.0, b=16.0, R=8.0), np.array(x), quadrature)

def test_cap_range_validation():
    with pytest.raises(ValidationError):
        CapRange(a=3.0, b=1.0, R=8.0)
    with pytest.raises(ValidationError):
        CapRange(a=0.0, b=20.0, R=8.0)

def test_half_space_volume_is_rejected(quadrature):
    with pytest.raises(OutsideDomain):
        integrate_ball(lambda Y: np.ones(len(Y)), BallGeometry.half_space(3), quadrature)

