"""
    Property suites over the numerical modules. Each suite returns a VerificationReport whose cases
    carry a pass/fail status, a signed margin (positive when the property holds with room) and the
    measured quantities; the CLI `verify` command and the `/suites` route both run them.
"""
import logging
import math
from typing import Callable, Dict, List, Optional

import numpy as np

from conformal import ConformalMap, distance_identity_residual, green_covariance_residual, psi_invariance_residual
from kernels import green, grunau_sweers_ratios
from models.errors import BlowUp, PolyharmonicError, StepFailure
from models.schemas import (
    BallGeometry, CapRange, CaseResult, KernelParams, PicardConfig, PicardVerdict, QuadratureSpec, ReflectionSpec,
    RescaleSpec, ScanVerdictKind, VerificationReport
)
from models.domain import CoefficientMap
from movingplane import (
    axial_symmetry_defect, check_reflection_inequalities, kernel_pointwise_bound_check, reflect
)
from ode1d import (
    ODEState, bounded_solution_scan, first_integral, integrate, linear_nonlinearity, power_nonlinearity, vector_field
)
from quadrature import cap_surface_integral, integrate_ball, spherical_average, unit_sphere_area
from representation import field_from_expression, green_poisson_reconstruct, halfspace_representation, pushed_bump_field
from rescale import (
    compose, derivative_scaling_factor, equation_covariance_residual, lower_order_vanishing, rescale_coefficient,
    rescale_field
)
from semilinear import GreenOperator, apply_green_operator, build_ball_lattice, picard_solve
from settings import get_settings
from utils.finite_differences import mixed_partial, richardson
from utils.sampling import ball_points, halton, pairs_in_ball, sphere_points

logger = logging.getLogger(__name__)

settings = get_settings()

Suite = Callable[[KernelParams, QuadratureSpec, int, Optional[int]], List[CaseResult]]


def classical_green(N: int, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Image-charge Green function of -Δ on the unit ball, N = 2 or 3."""
    d2 = np.sum((x - y) ** 2, axis=-1)
    # |x|^2 |y - x*|^2 with x* = x / |x|^2, written without the division
    image2 = np.sum(x * x, axis=-1) * np.sum(y * y, axis=-1) - 2 * np.sum(x * y, axis=-1) + 1.0
    if N == 2:
        return np.log(image2 / d2) / (4 * math.pi)
    if N == 3:
        return (1 / np.sqrt(d2) - 1 / np.sqrt(image2)) / (4 * math.pi)
    raise ValueError("Classical oracle is available for N = 2, 3 only")


def _relative(a, b, floor: float = 0.0) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), floor)))


def _bound(name: str, value: float, limit: float, **details) -> CaseResult:
    return CaseResult.check(name, bool(value <= limit), margin=float(limit - value), value=float(value),
                            limit=float(limit), **details)


# kernels

def halfspace_pairs(n: int, N: int, seed: int):
    cube = halton(2 * n, N, seed)
    pts = np.column_stack([0.1 + 1.9 * cube[:, 0], 2 * cube[:, 1:] - 1])
    return pts[:n], pts[n:]


def _kernels_suite(params, quadrature, seed, samples) -> List[CaseResult]:
    n = samples or 10_000
    N = params.N
    geom = BallGeometry.unit(N)
    X, Y = pairs_in_ball(n, N, seed, shrink=0.95)
    G = np.atleast_1d(green(params, geom, X, Y))
    cases = [
        _bound("symmetry", _relative(green(params, geom, Y, X), G), 1e-12),
        CaseResult.check("positivity", bool(G.min() > 0), margin=float(G.min())),
    ]
    Yb = sphere_points(n, N, seed + 1)
    Xb = ball_points(n, N, seed + 2, shrink=0.9)
    cases.append(_bound("boundary_vanishing", float(np.max(np.abs(green(params, geom, Xb, Yb)))), 1e-12))
    if params.m == 1 and N in (2, 3):
        cases.append(_bound("classical_agreement", _relative(G, classical_green(N, X, Y)), 1e-10))
    perturbed = params.perturbed(1.01)
    cases.append(_bound("normalization_scaling", _relative(green(perturbed, geom, X, Y), 1.01 * G), 1e-12))

    Xh, Yh = halfspace_pairs(min(n, 1000), N, seed + 3)
    radii = [64.0 * 2 ** k for k in range(19)]
    values = np.array([np.atleast_1d(green(params, BallGeometry.shifted_ball(R, N), Xh, Yh)) for R in radii])
    limit = np.atleast_1d(green(params, BallGeometry.half_space(N), Xh, Yh))
    drops = values[:-1] - values[1:]
    worst_drop = float(np.max(drops / (1 + np.abs(values[1:]))))
    cases.append(_bound("monotone_in_radius", worst_drop, 1e-10, radii=[radii[0], radii[-1]]))
    cases.append(_bound("halfspace_limit", float(np.max(np.abs(limit - values[-1]))), 1e-6, radius=radii[-1]))

    for order, ratios in grunau_sweers_ratios(params, 200, seed + 4).items():
        spread = float(ratios.max() / np.median(ratios))
        cases.append(CaseResult.check("grunau_sweers_order_{}".format(order),
                                      bool(np.all(np.isfinite(ratios)) and spread <= 100.0),
                                      margin=100.0 - spread, max_ratio=float(ratios.max()),
                                      median_ratio=float(np.median(ratios))))
    return cases


# conformal

def _conformal_suite(params, quadrature, seed, samples) -> List[CaseResult]:
    n = samples or 10_000
    N = params.N
    X, Y = pairs_in_ball(n, N, seed, shrink=0.95)
    cmap = ConformalMap(params)
    G = np.atleast_1d(green(params, BallGeometry.unit(N), X, Y))
    covariance = float(np.max(np.abs(green_covariance_residual(params, X, Y)) / (1 + G)))
    psi_defect = np.atleast_1d(psi_invariance_residual(params, X, Y))
    # rounding in φ(x) - φ(y) grows like 1/|x - y|
    separated = np.linalg.norm(X - Y, axis=1) >= 0.05
    cases = [
        _bound("green_covariance", covariance, 1e-10),
        _bound("distance_identity", float(np.max(distance_identity_residual(params, X, Y))), 1e-12),
        _bound("psi_invariance", float(np.max(psi_defect[separated], initial=0.0)), 1e-12),
        _bound("psi_invariance_all_pairs", float(np.max(psi_defect)), 1e-10),
        _bound("involution", float(np.max(np.abs(cmap.phi(cmap.phi(X)) - X))), 1e-12),
    ]
    boundary = sphere_points(n, N, seed + 1)
    boundary = boundary[np.linalg.norm(boundary + np.eye(N)[0], axis=1) > 0.1]
    cases.append(_bound("boundary_to_hyperplane", float(np.max(np.abs(cmap.phi(boundary)[:, 0]))), 1e-13))

    probe = X[:20]
    h = 1e-4
    jac = np.empty((len(probe), N, N))
    for k in range(N):
        step = np.zeros(N)
        step[k] = h
        jac[:, :, k] = (cmap.phi(probe + step) - cmap.phi(probe - step)) / (2 * h)
    cases.append(_bound("jacobian_determinant", _relative(np.abs(np.linalg.det(jac)), cmap.jacobian_det(probe)), 1e-6))
    return cases


# quadrature

def _quadrature_suite(params, quadrature, seed, samples) -> List[CaseResult]:
    N = params.N
    geom = BallGeometry.unit(N)
    volume = integrate_ball(lambda Y: np.ones(len(Y)), geom, quadrature)
    cases = [_bound("ball_volume", abs(volume / (unit_sphere_area(N) / N) - 1), 1e-10)]

    torsion = KernelParams(N=N, m=1)
    for i, x in enumerate(ball_points(3, N, seed, shrink=0.8)):
        value = integrate_ball(lambda Y: green(torsion, geom, x, Y), geom, quadrature, singular_at=x)
        exact = (1 - x @ x) / (2 * N)
        cases.append(_bound("torsion_function_{}".format(i), abs(value / exact - 1), 1e-7))

    for r in (0.3, 1.0, 2.5):
        averages = {
            "constant": (spherical_average(lambda Y: np.full(len(Y), 3.0), r, quadrature, N), 3.0),
            "linear": (spherical_average(lambda Y: Y @ np.arange(1.0, N + 1), r, quadrature, N), 0.0),
            "quadratic": (spherical_average(lambda Y: np.sum(Y * Y, axis=1), r, quadrature, N), r * r),
        }
        for label, (value, exact) in averages.items():
            cases.append(_bound("average_{}_r{}".format(label, r), abs(value - exact), 1e-8))

    # g∘w is only C^2 across the zero set of w for the negative-part power
    jensen_spec = quadrature.model_copy(update={
        "target_rel_error": max(quadrature.target_rel_error, 1e-5),
        "max_subdivisions": max(quadrature.max_subdivisions, 12)})
    convex = {
        "square": lambda s: s * s,
        "negative_part": lambda s: np.maximum(0.0, -s) ** params.q,
        "exp": np.exp,
    }
    coeffs = 2 * halton(100, N + 2, seed + 1) - 1
    for label, g in convex.items():
        worst = math.inf
        for row in coeffs:
            w = lambda Y, row=row: row[0] + Y @ row[1:N + 1] + row[N + 1] * np.sin(3 * Y[:, 0]) * np.cos(Y.sum(axis=1))
            outer = spherical_average(lambda Y: g(w(Y)), 0.7, jensen_spec, N)
            inner = float(g(spherical_average(w, 0.7, jensen_spec, N)))
            slack = 1e-8 + 2 * jensen_spec.target_rel_error * (abs(outer) + abs(inner))
            worst = min(worst, outer - inner + slack)
        cases.append(CaseResult.check("jensen_{}".format(label), bool(worst >= 0), margin=float(worst)))

    radii = [4.0 * 2 ** k for k in range(8)]
    x = np.zeros(N)
    x[0] = 1.0
    far = [cap_surface_integral(CapRange(a=1.0, b=2 * R, R=R), x, quadrature) for R in radii]
    slope = float(np.polyfit(np.log(radii), np.log(far), 1)[0])
    cases.append(CaseResult.check("cap_decay_exponent", bool(-0.65 <= slope <= -0.35),
                                  margin=float(min(slope + 0.65, -0.35 - slope)), slope=slope))
    near = np.array([cap_surface_integral(CapRange(a=0.0, b=2 * R, R=R), x, quadrature) for R in radii]) * x[0]
    spread = float(np.max(np.abs(near / near.mean() - 1)))
    cases.append(_bound("cap_near_constant_stability", spread, 0.2, constant=float(near.mean())))
    return cases


# representation

def _representation_suite(params, quadrature, seed, samples) -> List[CaseResult]:
    N = params.N
    geom = BallGeometry.unit(N)
    bump = field_from_expression("(1 - r2)**m", params, "bump")
    cases = [CaseResult.check("bump_is_dirichlet", bump.dirichlet)]
    points = ball_points(samples or 5, N, seed, shrink=0.9)
    errors = [abs(green_poisson_reconstruct(bump, geom, x, quadrature) - float(bump.v(x[None])[0])) for x in points]
    cases.append(_bound("delta_reproduction", max(errors), 1e-5, points=len(points)))
    x = points[0]
    exact = float(bump.v(x[None])[0])
    perturbed_errors = []
    for factor in (0.99, 1.01):
        rescaled = field_from_expression("(1 - r2)**m", params.perturbed(factor))
        perturbed_errors.append(abs(green_poisson_reconstruct(rescaled, geom, x, quadrature) - exact))
    cases.append(CaseResult.check("normalization_sensitivity", bool(min(perturbed_errors) > 1e-5),
                                  margin=float(min(perturbed_errors) - 1e-5), errors=perturbed_errors))

    plain = field_from_expression("x1 + r2", params, "x1 + |x|^2")
    error = abs(green_poisson_reconstruct(plain, geom, x, quadrature) - float(plain.v(x[None])[0]))
    cases.append(_bound("boundary_terms_reproduction", error, 1e-5))

    field = pushed_bump_field(params)
    xh = np.zeros(N)
    xh[0] = 1.0
    report = halfspace_representation(field, xh, quadrature)
    exact = float(field.u(xh[None])[0])
    cases.append(CaseResult.check("truncation_below_limit", bool(report.value <= exact * (1 + 1e-8)),
                                  margin=float(exact - report.value), exact=exact, value=report.value))
    cases.append(_bound("truncation_gap", (exact - report.value) / exact, 0.05, radius=report.radii[-1]))
    exponent = report.discrepancy_exponent
    cases.append(CaseResult.check("discrepancy_decay", bool(exponent is not None and exponent < 0),
                                  margin=None if exponent is None else float(-exponent), exponent=exponent))
    return cases


# movingplane

def _movingplane_suite(params, quadrature, seed, samples) -> List[CaseResult]:
    n = samples or 10_000
    N = params.N
    if N < 2:
        return [CaseResult.check("dimension", False, reason="reflections need N >= 2")]
    e = np.zeros(N)
    e[1] = 1.0
    cases = []
    for lam in (0.3, 0.5):
        spec = ReflectionSpec(e=tuple(e), lam=lam)
        report = check_reflection_inequalities(params, spec, n, seed=seed)
        for item in report.inequalities:
            cases.append(CaseResult.check("{}_lambda{}".format(item.inequality_id, lam), item.violations == 0,
                                          margin=item.min_margin, samples=item.samples, violations=item.violations))
    spec = ReflectionSpec(e=tuple(e), lam=0.3)
    X = 4 * halton(n, N, seed + 5) - 2
    cases.append(_bound("reflection_involution", float(np.max(np.abs(reflect(spec, reflect(spec, X)) - X))), 1e-15))

    small = kernel_pointwise_bound_check(params, n // 4, seed=seed + 6)
    large = kernel_pointwise_bound_check(params, n, seed=seed + 6)
    cases.append(_bound("pointwise_bound_stability", abs(small.max_ratio / large.max_ratio - 1), 0.1,
                        max_ratio=large.max_ratio))
    return cases


# semilinear

def small_data_level(operator: GreenOperator) -> float:
    return min(1e-2, 0.5 / float(np.max(operator.kernel_mass)))


def _semilinear_suite(params, quadrature, seed, samples) -> List[CaseResult]:
    N = params.N
    lattice = build_ball_lattice(params, n_radial=8, angular_order=6)
    operator = GreenOperator(lattice, quadrature)
    rng = np.random.default_rng(seed)
    v = lattice.with_values(rng.random(len(lattice.points)))
    image = apply_green_operator(v, quadrature, operator).values
    cases = [
        CaseResult.check("positivity", bool(image.min() >= 0), margin=float(image.min())),
        _bound("weights_volume", abs(lattice.volume - unit_sphere_area(N) / N), 1e-8),
    ]
    homogeneity = max(
        _relative(apply_green_operator(v.with_values(s * v.values), quadrature, operator).values,
                  s ** params.q * image, floor=1e-300)
        for s in (2.0, 0.5, 10.0))
    cases.append(_bound("homogeneity", homogeneity, 1e-12))
    worst = math.inf
    for _ in range(100):
        low = rng.random(len(lattice.points))
        high = low + rng.random(len(lattice.points))
        worst = min(worst, float(np.min(operator(high) - operator(low))))
    cases.append(CaseResult.check("monotonicity", bool(worst >= 0), margin=worst))

    delta = small_data_level(operator)
    result, history = picard_solve(lattice.with_values(np.full(len(lattice.points), delta)), PicardConfig(),
                                   quadrature, operator)
    sups = [row[1] for row in history]
    decreasing = all(b <= a for a, b in zip(sups, sups[1:]))
    cases.append(CaseResult.check("small_data_decay", bool(result.verdict == PicardVerdict.converged and decreasing),
                                  margin=None, delta=delta, iterations=result.report.iterations,
                                  residual=result.report.residual))
    defect = axial_symmetry_defect(result.solution)
    cases.append(_bound("fixed_point_axial_symmetry", defect, 1e-4))
    return cases


# ode1d

def _ode_suite(params, quadrature, seed, samples) -> List[CaseResult]:
    m, q = params.m, params.q
    nl = power_nonlinearity(q, "abs")
    amplitude = 1e-3 if m == 1 else 1e-4
    initial = ODEState.create(0.0, np.concatenate([np.zeros(m), np.full(m, amplitude)]), nl, m)
    cases = []
    try:
        trajectory = integrate(initial, nl, m, 10.0, tol=1e-12)
        cases.append(_bound("first_integral_drift", trajectory.h_drift, 1e-8, extension=nl.extension))
        if m == 1:
            cases.append(CaseResult.check("sign_identity", bool(np.max(trajectory.H) <= 0),
                                          margin=float(-np.max(trajectory.H))))
    except (BlowUp, StepFailure) as exc:
        cases.append(CaseResult.check("first_integral_drift", False, reason=exc.message))

    rng = np.random.default_rng(seed)
    state = rng.uniform(-1, 1, 2 * m)
    direction = vector_field(nl, m)(0.0, state)
    rate = richardson(lambda h: (first_integral(state + h * direction, nl, m)
                                 - first_integral(state - h * direction, nl, m)) / (2 * h), 1e-3)
    cases.append(_bound("first_integral_rate", abs(float(rate)), 1e-10))

    forward = integrate(initial, nl, m, 5.0, tol=1e-12)
    backward = integrate(forward.final, nl, m, 0.0, tol=1e-12, require_dirichlet=False)
    cases.append(_bound("time_reversal", float(np.max(np.abs(backward.final.derivs - initial.derivs))), 1e-8))

    scan = bounded_solution_scan(nl, m, [(0.0,) * m], 10.0, settings.BLOWUP_CAP)
    origin = scan.verdicts[0]
    cases.append(CaseResult.check("origin_stays_bounded", origin.verdict == ScanVerdictKind.stays_bounded,
                                  h_drift=origin.h_drift))

    if m == 1:
        linear = linear_nonlinearity()
        sine = integrate(ODEState.create(0.0, [0.0, 1.0], linear, 1), linear, 1, math.pi, tol=1e-12)
        cases.append(_bound("sine_first_integral", float(np.max(np.abs(sine.H + 0.5))), 1e-10))
    return cases


# rescale

def _rescale_suite(params, quadrature, seed, samples) -> List[CaseResult]:
    N, m = params.N, params.m
    x0 = tuple(0.3 * np.ones(N))
    M_values = [10.0, 1e2, 1e3, 1e4]
    cases = []
    smooth = lambda Y: 2.0 + 0.1 * np.sin(Y[:, 0]) * np.cos(np.sum(Y, axis=1))
    for degree in range(2 * m):
        order = (degree,) + (0,) * (N - 1)
        for label, values in (("constant", lambda Y: np.ones(len(Y))), ("smooth", smooth)):
            report = lower_order_vanishing(M_values, CoefficientMap(order=order, values=values), params, x0, seed=seed)
            cases.append(CaseResult.check("vanishing_{}_order{}".format(label, degree), report.within_tolerance,
                                          margin=float(abs(report.expected_exponent) * 0.05
                                                       - abs(report.fitted_slope - report.expected_exponent)),
                                          slope=report.fitted_slope, expected=report.expected_exponent))
    top = CoefficientMap(order=(2 * m,) + (0,) * (N - 1), values=lambda Y: np.ones(len(Y)))
    top_value = float(rescale_coefficient(RescaleSpec(M=1e3, x0=x0, params=params), top).values(np.zeros((1, N)))[0])
    cases.append(_bound("top_order_prefactor", abs(top_value - 1.0), 0.0))

    u = lambda Y: np.sin(Y[:, 0])
    derivatives = [lambda Y: np.sin(Y[:, 0]), lambda Y: np.cos(Y[:, 0]), lambda Y: -np.sin(Y[:, 0])]
    origin = np.zeros((1, N))
    for order in range(3):
        spec = RescaleSpec(M=16.0, x0=x0, params=params)
        k = (order,) + (0,) * (N - 1)
        fd = richardson(lambda h: mixed_partial(rescale_field(spec, u), origin, k, h), np.array([1e-2]))[0]
        law = derivative_scaling_factor(spec, order) * derivatives[order](spec.center[None])[0]
        cases.append(_bound("derivative_law_order{}".format(order), abs(fd - law), 1e-6))
        norms = []
        for M in M_values:
            spec = RescaleSpec(M=M, x0=x0, params=params)
            norms.append(abs(richardson(lambda h: mixed_partial(rescale_field(spec, u), origin, k, h),
                                        np.array([1e-2]))[0]))
        slope = float(np.polyfit(np.log(M_values), np.log(norms), 1)[0])
        expected = (1 - params.q) * order / (2 * m) - 1
        cases.append(_bound("derivative_exponent_order{}".format(order), abs(slope - expected),
                            0.05 * abs(expected), slope=slope, expected=expected))

    first = RescaleSpec(M=4.0, x0=x0, params=params)
    second = RescaleSpec(M=9.0, x0=tuple(-0.2 * np.ones(N)), params=params)
    Y = ball_points(64, N, seed)
    chained = rescale_field(second, rescale_field(first, u))(Y)
    single = rescale_field(compose(first, second), u)(Y)
    cases.append(_bound("composition", float(np.max(np.abs(chained - single))), 1e-12))

    dense = 4 * halton(4096, N, seed + 1) - 2
    sup = float(np.max(np.abs(u(dense))))
    peak = dense[int(np.argmax(np.abs(u(dense))))]
    normalizing = RescaleSpec(M=sup, x0=tuple(peak), params=params)
    # pulled back onto the sampled set, so the sampled sup is attained exactly
    pulled = (dense - normalizing.center) / normalizing.scale
    cases.append(_bound("sup_normalization", float(np.max(np.abs(rescale_field(normalizing, u)(pulled)))), 1 + 1e-9))

    # -u'' = u^q on a 1-D interval from ode1d, rescaled around an interior center
    line = KernelParams(N=1, m=1, q=params.q)
    nl = power_nonlinearity(params.q)
    trajectory = integrate(ODEState.create(0.0, [0.0, 1.0], nl, 1), nl, 1, 2.0)
    covariant = RescaleSpec(M=4.0, x0=(0.875,), params=line)
    y = (np.linspace(0.25, 1.5, 26) - 0.875) / covariant.scale
    cases.append(_bound("equation_covariance", equation_covariance_residual(trajectory, covariant, nl, y), 1e-6))
    return cases


SUITES: Dict[str, Suite] = {
    "kernels": _kernels_suite,
    "conformal": _conformal_suite,
    "quadrature": _quadrature_suite,
    "representation": _representation_suite,
    "movingplane": _movingplane_suite,
    "semilinear": _semilinear_suite,
    "ode": _ode_suite,
    "rescale": _rescale_suite,
}


def run_suite(name: str, params: KernelParams, quadrature: Optional[QuadratureSpec] = None,
              seed: Optional[int] = None, samples: Optional[int] = None) -> VerificationReport:
    """
        Runs one suite. A numerical error inside a suite becomes a failed `error` case rather than
        an exception, so the report is always written.
    """
    if name not in SUITES:
        raise ValueError("Unknown suite '{}', expected one of {}".format(name, ", ".join(SUITES)))
    quadrature = quadrature or QuadratureSpec()
    seed = settings.DEFAULT_SEED if seed is None else seed
    try:
        cases = SUITES[name](params, quadrature, seed, samples)
    except PolyharmonicError as exc:
        logger.warning("Suite %s aborted: %s", name, exc.message)
        cases = [CaseResult.check("error", False, error=type(exc).__name__, message=exc.message)]
    report = VerificationReport(suite=name, params=params.model_dump(), cases=cases)
    logger.info("Suite %s: %d passed, %d failed", name, report.summary.passed, report.summary.failed)
    return report
