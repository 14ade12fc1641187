import numpy as np
import pytest
from pydantic import ValidationError

from models.errors import IncompatibleLattice
from models.schemas import KernelParams, ReflectionSpec, SampleLabel
from movingplane import (
    axial_symmetry_defect, check_reflection_inequalities, kernel_pointwise_bound_check, pointwise_ratios, reflect,
    sample_h_lambda, sample_j_lambda, sample_w_mu, satisfies_label
)
from tests.utils import small_lattice


@pytest.fixture
def plane():
    return ReflectionSpec(e=(0.0, 1.0, 0.0), lam=0.3)

def test_reflect_point(plane):
    np.testing.assert_allclose(reflect(plane, [0.2, 0.5, -0.1]), [0.2, 0.1, -0.1], atol=1e-15)

def test_reflect_is_an_involution(plane, seed):
    X = np.random.default_rng(seed).uniform(-2, 2, (100, 3))
    np.testing.assert_allclose(reflect(plane, reflect(plane, X)), X, atol=1e-14)

def test_reflection_spec_accepts_lambda_alias():
    assert ReflectionSpec.model_validate({"e": (0.0, 0.0, 1.0), "lambda": 0.4}).lam == 0.4

@pytest.mark.parametrize(
    "e",
    [(1.0, 0.0, 0.0), (0.0, 0.5, 0.5), (1.0,)],
    ids=["along_axis", "not_unit", "too_short"]
)
def test_reflection_spec_validation(e):
    with pytest.raises(ValidationError):
        ReflectionSpec(e=e, lam=0.3)

def test_samples_carry_their_labels(plane, seed):
    h = sample_h_lambda(plane, 50, seed)
    j = sample_j_lambda(plane, 50, seed)
    assert h.label == SampleLabel.h_lambda_cap_b and len(h.points) == 50
    assert j.label == SampleLabel.j_lambda and len(j.points) == 50
    assert satisfies_label(h, plane)
    assert satisfies_label(j, plane)

def test_w_mu_samples(plane, seed):
    # v decreasing in x_2: reflecting H_μ points lowers x_2 and raises v, so W_μ is empty
    empty = sample_w_mu(lambda X: -X[:, 1], plane, 50, seed)
    assert len(empty.points) == 0
    full = sample_w_mu(lambda X: X[:, 1], plane, 50, seed)
    assert len(full.points) == 50
    assert satisfies_label(full, plane, v=lambda X: X[:, 1])
    with pytest.raises(ValueError):
        satisfies_label(full, plane)

@pytest.mark.parametrize(
    "params",
    [KernelParams(N=3, m=1), KernelParams(N=3, m=2), KernelParams(N=2, m=2)],
    ids=["m1_N3", "m2_N3", "m2_N2"]
)
def test_reflection_inequalities_hold(params, seed):
    e = np.zeros(params.N)
    e[1] = 1.0
    report = check_reflection_inequalities(params, ReflectionSpec(e=tuple(e), lam=0.3), 400, seed=seed)
    assert {item.inequality_id for item in report.inequalities} == {
        "green_reflection", "green_difference", "green_j_lambda", "weight_comparison"}
    assert report.violations == 0

@pytest.mark.parametrize(
    "spec, n_samples",
    [
        pytest.param(ReflectionSpec(e=(0.0, 1.0, 0.0), lam=1.5), 10, id="lambda_too_large"),
        pytest.param(ReflectionSpec(e=(0.0, 1.0, 0.0), lam=0.3), 0, id="no_samples"),
        pytest.param(ReflectionSpec(e=(0.0, 1.0), lam=0.3), 10, id="dimension"),
    ]
)
def test_reflection_check_arguments(laplace_3d, spec, n_samples):
    with pytest.raises(ValueError):
        check_reflection_inequalities(laplace_3d, spec, n_samples)

def test_axial_symmetry_defect(laplace_3d):
    lattice = small_lattice(laplace_3d)
    symmetric = lattice.with_values(np.exp(lattice.axial) + lattice.radial ** 2)
    assert axial_symmetry_defect(symmetric) <= 1e-14
    broken = lattice.with_values(lattice.points[:, 1])
    assert axial_symmetry_defect(broken) > 0.1

def test_axial_symmetry_needs_orbits(laplace_3d):
    lattice = small_lattice(laplace_3d)
    lattice.orbits = None
    with pytest.raises(IncompatibleLattice):
        axial_symmetry_defect(lattice)

def test_pointwise_bound(biharmonic_3d, seed):
    report = kernel_pointwise_bound_check(biharmonic_3d, 500, seed=seed)
    assert report.samples == 500
    assert 0 < report.median_ratio <= report.max_ratio < np.inf

@pytest.mark.parametrize(
    "params",
    [KernelParams(N=3, m=1), KernelParams(N=5, m=2), KernelParams(N=7, m=3)],
    ids=["m1_N3", "m2_N5", "m3_N7"]
)
def test_pointwise_bound_stable_when_samples_quadruple(params, seed):
    small = kernel_pointwise_bound_check(params, 500, seed=seed)
    large = kernel_pointwise_bound_check(params, 2000, seed=seed)
    assert large.max_ratio >= large.sampled_max_ratio
    assert abs(small.max_ratio / large.max_ratio - 1) <= 0.1

def test_pointwise_bound_without_polish(biharmonic_3d, seed):
    report = kernel_pointwise_bound_check(biharmonic_3d, 200, seed=seed, polish=False)
    assert report.max_ratio == report.sampled_max_ratio

def test_pointwise_ratio_value(laplace_3d):
    # G_1(0, y) |y|^2 = (1/|y| - 1) |y|^2 / (4π)
    ratio = pointwise_ratios(laplace_3d, [0.0, 0.0, 0.0], [0.5, 0.0, 0.0])
    np.testing.assert_allclose(ratio, [0.25 / (4 * np.pi)], rtol=1e-13)

def test_pointwise_bound_needs_two_dimensions():
    with pytest.raises(ValueError):
        kernel_pointwise_bound_check(KernelParams(N=1, m=1), 10)
