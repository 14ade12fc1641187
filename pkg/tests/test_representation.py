import numpy as np
import pytest

from models.errors import MissingLaplacianPower, OutsideDomain, ScheduleTooSmall
from models.schemas import BallGeometry, KernelParams
from representation import (
    boundary_smallness_profile, bump_source_constant, check_dirichlet, default_schedule, field_from_expression,
    green_poisson_reconstruct, halfspace_representation, load_corpus, pushed_bump_field, zero_field
)


@pytest.mark.parametrize(
    "m, N, expected",
    [(1, 3, 6.0), (2, 3, 120.0), (1, 2, 4.0), (3, 5, 48.0 * 5 * 7 * 9)],
    ids=["m1_N3", "m2_N3", "m1_N2", "m3_N5"]
)
def test_bump_source_constant(m, N, expected):
    assert bump_source_constant(m, N) == pytest.approx(expected)

def test_bump_field_tower(biharmonic_3d):
    bump = field_from_expression("(1 - r2)**m", biharmonic_3d)
    Y = np.array([[0.1, 0.2, 0.3], [0.0, 0.0, 0.0]])
    np.testing.assert_allclose(bump.v(Y), (1 - np.sum(Y * Y, axis=1)) ** 2)
    np.testing.assert_allclose(bump.source(Y), 120.0)
    assert len(bump.laplacian_powers) == 3
    assert bump.dirichlet

@pytest.mark.parametrize(
    "expression, dirichlet",
    [
        pytest.param("(1 - r2)**m * x1", True, id="odd_bump"),
        pytest.param("x1", False, id="linear"),
        pytest.param("r2", False, id="radial"),
    ]
)
def test_dirichlet_detection(laplace_3d, expression, dirichlet):
    ms = field_from_expression(expression, laplace_3d)
    assert ms.dirichlet is dirichlet
    assert check_dirichlet(ms, BallGeometry.unit(3)) is dirichlet

def test_load_corpus_filters():
    corpus = load_corpus(orders=[1], dimensions=[3])
    assert len(corpus) == 8
    assert all(ms.params == KernelParams(N=3, m=1) for ms in corpus)
    assert sum(ms.dirichlet for ms in corpus) == 4

@pytest.mark.parametrize(
    "expression, params, x",
    [
        pytest.param("(1 - r2)**m", KernelParams(N=3, m=1), [0.2, 0.1, 0.0], id="bump_m1"),
        pytest.param("(1 - r2)**m * x1", KernelParams(N=3, m=2), [0.3, -0.2, 0.1], id="odd_bump_m2"),
        pytest.param("x1 + r2", KernelParams(N=2, m=1), [0.3, 0.1], id="boundary_terms_m1"),
        pytest.param("x1**2 - x2**2", KernelParams(N=2, m=2), [-0.2, 0.4], id="boundary_terms_m2"),
        pytest.param("x1 + r2", KernelParams(N=3, m=3), [0.2, 0.1, -0.1], id="boundary_terms_m3"),
        pytest.param("r2", KernelParams(N=5, m=3), [0.1, -0.2, 0.0, 0.3, 0.1], id="radial_m3_N5"),
        pytest.param("(1 - r2)**m", KernelParams(N=5, m=2), [0.1, 0.2, 0.0, -0.1, 0.3], id="bump_m2_N5"),
        pytest.param("(1 - r2)**m", KernelParams(N=7, m=3), [0.1, 0.0, -0.2, 0.1, 0.0, 0.1, 0.1], id="bump_m3_N7"),
    ]
)
def test_green_poisson_reproduces_field(expression, params, x, quadrature):
    ms = field_from_expression(expression, params)
    x = np.asarray(x)
    value = green_poisson_reconstruct(ms, BallGeometry.unit(params.N), x, quadrature)
    assert value == pytest.approx(float(ms.v(x[None])[0]), abs=1e-5)

@pytest.mark.parametrize("factor", [0.99, 1.01])
def test_reconstruction_detects_perturbed_normalization(biharmonic_3d, quadrature, factor):
    x = np.array([0.2, 0.1, 0.0])
    exact = (1 - 0.05) ** 2
    ms = field_from_expression("(1 - r2)**m", biharmonic_3d.perturbed(factor))
    value = green_poisson_reconstruct(ms, BallGeometry.unit(3), x, quadrature)
    assert abs(value - exact) > 1e-5
    assert value == pytest.approx(factor * exact, rel=1e-5)

def test_reconstruction_needs_interior_point(laplace_3d, quadrature):
    ms = field_from_expression("(1 - r2)**m", laplace_3d)
    with pytest.raises(OutsideDomain):
        green_poisson_reconstruct(ms, BallGeometry.unit(3), np.array([1.0, 0.0, 0.0]), quadrature)
    with pytest.raises(OutsideDomain):
        green_poisson_reconstruct(ms, BallGeometry.half_space(3), np.array([1.0, 0.0, 0.0]), quadrature)

def test_reconstruction_needs_laplacian_powers(biharmonic_3d, quadrature):
    ms = field_from_expression("x1", biharmonic_3d)
    ms.laplacian_gradients = []
    with pytest.raises(MissingLaplacianPower):
        green_poisson_reconstruct(ms, BallGeometry.unit(3), np.array([0.1, 0.0, 0.0]), quadrature)

def test_pushed_bump_values(biharmonic_3d):
    field = pushed_bump_field(biharmonic_3d)
    # u(η) = 8 η_1^2 / |η + e_1|^3; u(e_1) = 1, u = 0 on the boundary
    Y = np.array([[1.0, 0.0, 0.0], [0.0, 0.5, 0.2]])
    np.testing.assert_allclose(field.u(Y), [1.0, 0.0], atol=1e-15)
    # 2^N C_{m,N} / |2 e_1|^{2m+N} at η = e_1
    assert field.source(Y[:1])[0] == pytest.approx(8 * 120.0 / 2 ** 7)

def test_boundary_smallness_profile_is_monotone(biharmonic_3d):
    field = pushed_bump_field(biharmonic_3d)
    values = [boundary_smallness_profile(field, delta, 16.0, n_samples=200) for delta in (0.05, 0.5, 4.0, 32.0)]
    assert values == sorted(values)
    with pytest.raises(ValueError):
        boundary_smallness_profile(field, 0.0, 16.0)

def test_default_schedule():
    assert default_schedule(1.0) == [4.0 * 2 ** k for k in range(9)]

def test_halfspace_representation_of_zero_field(laplace_3d, quadrature):
    report = halfspace_representation(zero_field(laplace_3d), [1.0, 0.0, 0.0], quadrature, R_schedule=[4.0, 8.0])
    assert report.values == [0.0, 0.0]
    assert report.boundary_discrepancy == [0.0, 0.0]

def test_halfspace_representation_increases_below_the_field(laplace_3d, quadrature):
    field = pushed_bump_field(laplace_3d)
    report = halfspace_representation(field, [1.0, 0.3, 0.0], quadrature, R_schedule=[4.0, 8.0, 16.0])
    exact = float(field.u(np.array([[1.0, 0.3, 0.0]]))[0])
    assert report.values == sorted(report.values)
    assert report.value <= exact
    assert all(gap >= 0 for gap in report.cauchy_gaps)
    assert report.discrepancy_exponent is not None

@pytest.mark.parametrize(
    "schedule",
    [[1.5, 4.0], [8.0, 4.0], []],
    ids=["inside_2x1", "decreasing", "empty"]
)
def test_halfspace_schedule_errors(laplace_3d, quadrature, schedule):
    with pytest.raises(ScheduleTooSmall):
        halfspace_representation(pushed_bump_field(laplace_3d), [1.0, 0.0, 0.0], quadrature, R_schedule=schedule)

def test_halfspace_point_must_be_inside(laplace_3d, quadrature):
    with pytest.raises(OutsideDomain):
        halfspace_representation(pushed_bump_field(laplace_3d), [-1.0, 0.0, 0.0], quadrature)
