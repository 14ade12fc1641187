import math

import numpy as np
import pytest
from scipy import integrate

from kernels import (
    boggio_profile, green, grunau_sweers_ratios, kernel_derivative, laplacian_power_of_kernel,
    normalization_constant, profile_unchecked, psi
)
from models.errors import CoincidentPoints, DimensionMismatch, InfiniteProfile, NonFiniteValue, OutsideDomain
from models.schemas import BallGeometry, KernelParams
from tests.utils import NEWTON_3D
from utils.sampling import pairs_in_ball, sphere_points


@pytest.mark.parametrize(
    "m, N, expected",
    [
        (1, 3, 1 / (4 * math.pi)),
        (1, 2, 1 / (2 * math.pi)),
        (2, 4, 1 / (8 * math.pi ** 2)),
    ],
    ids=["newton", "plane", "biharmonic_4d"]
)
def test_normalization_constant(m, N, expected):
    assert normalization_constant(m, N) == pytest.approx(expected, rel=1e-14)

@pytest.mark.parametrize(
    "m, N",
    [(1, 3), (2, 3), (2, 4), (3, 5), (2, 7), (1, 2), (2, 2), (3, 4), (3, 2)],
    ids=["m1_N3", "m2_N3", "m2_N4", "m3_N5", "m2_N7", "m1_N2", "m2_N2", "m3_N4", "m3_N2"]
)
@pytest.mark.parametrize("t", [1e-3, 0.4, 1.0, 1.5, 7.0, 120.0])
def test_profile_matches_quadrature(m, N, t):
    exact, _ = integrate.quad(lambda z: z ** (m - 1) * (1 + z) ** (-N / 2), 0, t, epsabs=0, epsrel=1e-13, limit=200)
    assert float(profile_unchecked(t, m, N)) == pytest.approx(exact, rel=1e-10)

def test_profile_at_infinity(laplace_3d):
    # int_0^inf (1+z)^{-3/2} dz = 2
    assert boggio_profile(math.inf, laplace_3d) == pytest.approx(2.0, rel=1e-14)

def test_profile_at_infinity_diverges():
    with pytest.raises(InfiniteProfile):
        boggio_profile(math.inf, KernelParams(N=2, m=1))

def test_profile_plane_value():
    assert boggio_profile(1.0, KernelParams(N=2, m=1)) == pytest.approx(math.log(2), rel=1e-14)

def test_profile_rejects_negative_argument(laplace_3d):
    with pytest.raises(OutsideDomain):
        boggio_profile(-0.1, laplace_3d)

def test_profile_is_vectorized(laplace_3d):
    t = np.array([0.0, 3.0, 8.0])
    # (1+z)^{-3/2} integrates to 2 (1 - (1+t)^{-1/2})
    np.testing.assert_allclose(boggio_profile(t, laplace_3d), 2 * (1 - (1 + t) ** -0.5), rtol=1e-13)

def test_green_newton_value(laplace_3d):
    geom = BallGeometry.unit(3)
    assert green(laplace_3d, geom, [0, 0, 0], [0.5, 0, 0]) == pytest.approx(NEWTON_3D, rel=1e-13)
    assert psi(laplace_3d, geom, [0, 0, 0], [0.5, 0, 0]) == pytest.approx(3.0, rel=1e-14)

@pytest.mark.parametrize(
    "params",
    [KernelParams(N=3, m=1), KernelParams(N=3, m=2), KernelParams(N=2, m=2), KernelParams(N=5, m=3)],
    ids=["m1_N3", "m2_N3", "m2_N2", "m3_N5"]
)
def test_green_symmetric_and_positive(params, seed):
    geom = BallGeometry.unit(params.N)
    X, Y = pairs_in_ball(200, params.N, seed, shrink=0.95)
    G = green(params, geom, X, Y)
    np.testing.assert_allclose(green(params, geom, Y, X), G, rtol=1e-12)
    assert np.all(G > 0)

def test_green_vanishes_on_boundary(biharmonic_3d, seed):
    geom = BallGeometry.unit(3)
    Y = sphere_points(50, 3, seed)
    X = 0.5 * sphere_points(50, 3, seed + 1)
    assert np.max(np.abs(green(biharmonic_3d, geom, X, Y))) <= 1e-14

def test_green_normalization_override(laplace_3d):
    geom = BallGeometry.unit(3)
    base = green(laplace_3d, geom, [0.1, 0.2, 0], [0.3, -0.1, 0.2])
    assert green(laplace_3d.perturbed(2.0), geom, [0.1, 0.2, 0], [0.3, -0.1, 0.2]) == pytest.approx(2 * base, rel=1e-14)

def test_dilated_ball_scaling(biharmonic_3d):
    # G_R(Rx, Ry) = R^{2m-N} G_1(x, y)
    x, y = np.array([0.1, 0.2, 0.0]), np.array([-0.3, 0.1, 0.4])
    scaled = green(biharmonic_3d, BallGeometry.ball(3.0, 3), 3 * x, 3 * y)
    assert scaled == pytest.approx(3.0 * green(biharmonic_3d, BallGeometry.unit(3), x, y), rel=1e-12)

def test_shifted_ball_tends_to_half_space(laplace_3d):
    x, y = [0.5, 0.2, 0.0], [1.0, -0.3, 0.1]
    limit = green(laplace_3d, BallGeometry.half_space(3), x, y)
    near = green(laplace_3d, BallGeometry.shifted_ball(1e6, 3), x, y)
    assert near <= limit
    assert near == pytest.approx(limit, rel=1e-4)

@pytest.mark.parametrize(
    "x, y, error",
    [
        pytest.param([0.2, 0, 0], [0.2, 0, 0], CoincidentPoints, id="coincident"),
        pytest.param([1.5, 0, 0], [0.2, 0, 0], OutsideDomain, id="outside"),
        pytest.param([0.2, 0], [0.1, 0], DimensionMismatch, id="dimension"),
    ]
)
def test_green_errors(laplace_3d, x, y, error):
    with pytest.raises(error):
        green(laplace_3d, BallGeometry.unit(3), x, y)

def test_kernel_derivative_newton(laplace_3d):
    # G_1(0, y) = (1/|y| - 1) / (4π), so ∂_{y_1} G = -y_1 / (4π |y|^3) = -1/π at y = (0.5, 0, 0)
    value = kernel_derivative(laplace_3d, BallGeometry.unit(3), [0, 0, 0], [0.5, 0, 0], (1, 0, 0))
    assert value == pytest.approx(-1 / math.pi, rel=1e-6)

def test_kernel_derivative_rejects_high_order(laplace_3d):
    with pytest.raises(ValueError):
        kernel_derivative(laplace_3d, BallGeometry.unit(3), [0, 0, 0], [0.5, 0, 0], (3, 0, 0))

def test_newton_kernel_is_harmonic(laplace_3d, seed):
    Y = 0.5 * sphere_points(10, 3, seed)
    values = laplacian_power_of_kernel(laplace_3d, BallGeometry.unit(3), np.zeros(3), Y, 1)
    assert np.max(np.abs(values)) <= 1e-4

def test_grunau_sweers_ratios_are_finite(biharmonic_3d, seed):
    ratios = grunau_sweers_ratios(biharmonic_3d, 20, seed)
    assert sorted(ratios) == [2, 3]
    for values in ratios.values():
        assert np.all(np.isfinite(values))
        assert np.all(values >= 0)

def test_green_plane_matches_classical():
    # G_1(0, y) = -ln|y| / (2π)
    value = green(KernelParams(N=2, m=1), BallGeometry.unit(2), [0, 0], [0.9, 0])
    assert value == pytest.approx(-math.log(0.9) / (2 * math.pi), rel=1e-12)

def test_green_biharmonic_4d_closed_form():
    # P(t) = ln(1+t) + 1/(1+t) - 1 for m = 2, N = 4; ψ(0, y) = 3 at |y| = 1/2
    params = KernelParams(N=4, m=2)
    value = green(params, BallGeometry.unit(4), [0, 0, 0, 0], [0.5, 0, 0, 0])
    expected = 0.5 * normalization_constant(2, 4) * (math.log(4) + 0.25 - 1)
    assert value == pytest.approx(expected, rel=1e-12)

def test_green_rejects_non_finite_values(laplace_3d, monkeypatch):
    monkeypatch.setattr("kernels.profile_unchecked", lambda t, m, N: np.full(np.shape(t), np.nan))
    with pytest.raises(NonFiniteValue):
        green(laplace_3d, BallGeometry.unit(3), [0, 0, 0], [0.5, 0, 0])
