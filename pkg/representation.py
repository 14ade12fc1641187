import json
import logging
import math
from typing import Iterable, List, Optional, Sequence

import numpy as np
import sympy
from pydantic import BaseModel, Field

from kernels import (
    as_points, domain_gap, green_unchecked, laplacian_power_of_kernel, normal_derivative_of_laplacian_power
)
from models.domain import HalfSpaceField, ManufacturedSolution
from models.errors import MissingLaplacianPower, NonMonotoneSequence, OutsideDomain, ScheduleTooSmall
from models.schemas import BallGeometry, CapRange, HalfSpaceReport, KernelParams, QuadratureSpec
from quadrature import cap_surface_integral, integrate_ball_with_error, sphere_integral
from settings import get_settings
from utils.finite_differences import directional_derivative, richardson
from utils.sampling import halton, sphere_points

logger = logging.getLogger(__name__)

settings = get_settings()


# Manufactured solutions

class CorpusEntry(BaseModel):
    descriptor: str
    expression: str
    orders: List[int] = Field(min_length=1)
    dimensions: List[int] = Field(min_length=1)


class CorpusManifest(BaseModel):
    schema_version: str
    fields: List[CorpusEntry]


def bump_source_constant(m: int, N: int) -> float:
    """(-Δ)^m (1 - |x|^2)^m = 2^m m! ∏_{j<m} (N + 2j)."""
    return 2.0 ** m * math.factorial(m) * math.prod(N + 2 * j for j in range(m))


def _vectorize(expr, symbols):
    fn = sympy.lambdify(symbols, expr, "numpy")

    def field(Y):
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        return np.broadcast_to(np.asarray(fn(*Y.T), dtype=float), (len(Y),)).copy()
    return field


def _vectorize_gradient(components, symbols):
    parts = [_vectorize(c, symbols) for c in components]
    return lambda Y: np.column_stack([part(Y) for part in parts])


def _symbolic_tower(expression: str, params: KernelParams, levels: int):
    symbols = sympy.symbols("x1:{}".format(params.N + 1))
    names = {"x{}".format(i + 1): s for i, s in enumerate(symbols)}
    names["r2"] = sum(s ** 2 for s in symbols)
    names["m"] = sympy.Integer(params.m)
    names["N"] = sympy.Integer(params.N)
    expr = sympy.sympify(expression, locals=names)
    powers = [expr]
    for _ in range(levels):
        powers.append(sum(sympy.diff(powers[-1], s, 2) for s in symbols))
    return symbols, powers


def field_from_expression(expression: str, params: KernelParams, descriptor: Optional[str] = None,
                          geom: Optional[BallGeometry] = None) -> ManufacturedSolution:
    """
        Builds a manufactured solution from a sympy expression in x1..xN (and r2 = |x|^2, m, N):
        Laplacian powers up to order m, their gradients and the source (-Δ)^m v.
    """
    symbols, powers = _symbolic_tower(expression, params, params.m)
    ms = ManufacturedSolution(
        params=params,
        v=_vectorize(powers[0], symbols),
        laplacian_powers=[_vectorize(p, symbols) for p in powers],
        source=_vectorize((-1) ** params.m * powers[params.m], symbols),
        descriptor=descriptor or expression,
        laplacian_gradients=[_vectorize_gradient([sympy.diff(p, s) for s in symbols], symbols) for p in powers[:-1]],
    )
    ms.dirichlet = check_dirichlet(ms, geom or BallGeometry.unit(params.N))
    return ms


def check_dirichlet(ms: ManufacturedSolution, geom: BallGeometry, n_samples: int = 100,
                    tolerance: float = 1e-8) -> bool:
    """
        True when v and its normal derivatives up to order m-1 vanish at sampled boundary points.
    """
    center = geom.center
    normals = sphere_points(n_samples, geom.dim, settings.DEFAULT_SEED)
    boundary = center + geom.radius * normals
    h = 1e-3 * geom.radius
    for order in range(ms.params.m):
        values = richardson(lambda hh: directional_derivative(ms.v, boundary, normals, order, hh), np.full(n_samples, h))
        if np.max(np.abs(values)) > tolerance:
            return False
    return True


def load_corpus(path: Optional[str] = None, orders: Optional[Iterable[int]] = None,
                dimensions: Optional[Iterable[int]] = None) -> List[ManufacturedSolution]:
    """Expands the corpus manifest into manufactured solutions, one per (entry, m, N)."""
    with open(path or settings.CORPUS_PATH, encoding="utf-8") as handle:
        manifest = CorpusManifest.model_validate(json.load(handle))
    corpus = []
    for entry in manifest.fields:
        for m in entry.orders:
            if orders is not None and m not in orders:
                continue
            for N in entry.dimensions:
                if dimensions is not None and N not in dimensions:
                    continue
                params = KernelParams(N=N, m=m)
                corpus.append(field_from_expression(entry.expression, params, "{} (m={}, N={})".format(
                    entry.descriptor, m, N)))
    return corpus


# Green-Poisson reconstruction on balls

def _required_orders(m: int):
    return (m + 1) // 2, m // 2


def _full_term(ms: ManufacturedSolution, geom: BallGeometry, x: np.ndarray, i: int, spec: QuadratureSpec) -> float:
    """∮ (Δ^{i-1}v ∂_ν Δ^{m-i}G - Δ^{m-i}G ∂_ν Δ^{i-1}v) ds."""
    params, center, R = ms.params, geom.center, geom.radius
    j = params.m - i

    def integrand(Y):
        normals = (Y - center) / R
        dv = np.sum(ms.laplacian_gradients[i - 1](Y) * normals, axis=1)
        return (ms.laplacian_powers[i - 1](Y) * normal_derivative_of_laplacian_power(params, geom, x, Y, normals, j)
                - laplacian_power_of_kernel(params, geom, x, Y, j) * dv)
    return sphere_integral(integrand, center, R, spec)


def _middle_term(ms: ManufacturedSolution, geom: BallGeometry, x: np.ndarray, spec: QuadratureSpec) -> float:
    """∮ Δ^{(m-1)/2}v ∂_ν Δ^{(m-1)/2}G ds, present for odd m only."""
    params, center, R = ms.params, geom.center, geom.radius
    j = (params.m - 1) // 2

    def integrand(Y):
        normals = (Y - center) / R
        return ms.laplacian_powers[j](Y) * normal_derivative_of_laplacian_power(params, geom, x, Y, normals, j)
    return sphere_integral(integrand, center, R, spec)


def _boundary_terms_even(ms, geom, x, spec) -> float:
    return sum(_full_term(ms, geom, x, i, spec) for i in range(1, ms.params.m // 2 + 1))


def _boundary_terms_odd(ms, geom, x, spec) -> float:
    m = ms.params.m
    total = sum(_full_term(ms, geom, x, i, spec) for i in range(1, (m - 1) // 2 + 1))
    return -(total + _middle_term(ms, geom, x, spec))


def green_poisson_reconstruct(ms: ManufacturedSolution, geom: BallGeometry, x, spec: QuadratureSpec) -> float:
    """
        Boundary terms of the Green-Poisson formula plus the volume term ∫ G(x, y) (-Δ)^m v(y) dy.

        Only terms whose kernel factor has order >= m survive the Dirichlet conditions of G; even and
        odd m use separate term lists. For Dirichlet-compatible fields the boundary terms vanish and
        only the volume term is evaluated.

        :raises MissingLaplacianPower: when ms lacks a Laplacian power or gradient the formula needs
    """
    params = ms.params
    if geom.is_half_space:
        raise OutsideDomain(message="Reconstruction needs a finite ball")
    x = as_points(params, x)
    if domain_gap(geom, x) <= 0:
        raise OutsideDomain(message="Reconstruction point must be interior")
    powers_needed, gradients_needed = _required_orders(params.m)
    if not ms.dirichlet:
        if len(ms.laplacian_powers) < powers_needed:
            raise MissingLaplacianPower(message="Need Δ^i v for i < {}, got {}".format(
                powers_needed, len(ms.laplacian_powers)))
        if len(ms.laplacian_gradients) < gradients_needed:
            raise MissingLaplacianPower(message="Need ∇Δ^i v for i < {}, got {}".format(
                gradients_needed, len(ms.laplacian_gradients)))

    volume = integrate_ball_with_error(
        lambda Y: green_unchecked(params, geom, x, Y) * ms.source(Y), geom, spec, singular_at=x
    ).value
    if ms.dirichlet:
        boundary = 0.0
    elif params.m % 2 == 0:
        boundary = _boundary_terms_even(ms, geom, x, spec)
    else:
        boundary = _boundary_terms_odd(ms, geom, x, spec)
    logger.debug("Reconstruction of %s at %s: volume %.12e, boundary %.12e", ms.descriptor, x, volume, boundary)
    return volume + boundary


# Half-space representation

def pushed_bump_field(params: KernelParams) -> HalfSpaceField:
    """
        u(η) = 2^N η_1^m / |η + e_1|^N, the half-space image of the ball bump (1 - |y|^2)^m.
        Bounded, Dirichlet to order m, with source 2^N C_{m,N} |η + e_1|^{-2m-N} >= 0.
    """
    m, N = params.m, params.N
    symbols, powers = _symbolic_tower("2**N * x1**m / ((x1 + 1)**2 + r2 - x1**2)**(N / 2)", params, max(m - 1, 0))
    constant = 2.0 ** N * bump_source_constant(m, N)

    def source(Y):
        Y = np.atleast_2d(Y)
        shifted = Y.copy()
        shifted[:, 0] += 1.0
        return constant * np.sum(shifted * shifted, axis=1) ** (-(2 * m + N) / 2)

    return HalfSpaceField(
        params=params,
        u=_vectorize(powers[0], symbols),
        laplacian_powers=[_vectorize(p, symbols) for p in powers],
        laplacian_gradients=[_vectorize_gradient([sympy.diff(p, s) for s in symbols], symbols) for p in powers],
        source=source,
        descriptor="pushed bump (m={}, N={})".format(m, N),
    )


def zero_field(params: KernelParams) -> HalfSpaceField:
    zero = lambda Y: np.zeros(len(np.atleast_2d(Y)))
    return HalfSpaceField(
        params=params, u=zero, laplacian_powers=[zero] * params.m,
        laplacian_gradients=[lambda Y: np.zeros_like(np.atleast_2d(Y))] * params.m,
        source=zero, descriptor="zero",
    )


def default_schedule(x1: float) -> List[float]:
    return [x1 * 2.0 ** k for k in range(2, 11)]


def _cap_samples(R: float, N: int, n_samples: int, seed: int):
    """Points on ∂B_R^+ concentrated toward the flat part, with outward normals."""
    y1 = 2 * R * halton(n_samples, 1, seed)[:, 0] ** 4
    thetas = sphere_points(n_samples, N - 1, seed + 1) if N > 1 else np.ones((n_samples, 0))
    radius = np.sqrt(np.maximum(2 * R * y1 - y1 ** 2, 0.0))
    Y = np.column_stack([y1, radius[:, None] * thetas])
    normals = Y.copy()
    normals[:, 0] -= R
    return Y, normals / R


def boundary_smallness_profile(field: HalfSpaceField, delta: float, R: float, n_samples: int = 1000,
                               seed: Optional[int] = None) -> float:
    """
        Sampled sup of Σ (|Δ^j u| + |∂_ν Δ^j u|) over {y ∈ ∂B_R^+ : y_1 <= δ}. The sample set does not
        depend on δ, so the profile is monotone in δ.
    """
    if delta <= 0:
        raise ValueError("delta must be positive, got {}".format(delta))
    seed = settings.DEFAULT_SEED if seed is None else seed
    Y, normals = _cap_samples(R, field.params.N, n_samples, seed)
    inside = Y[:, 0] <= delta
    if not np.any(inside):
        return 0.0
    return float(np.max(field.boundary_weight(Y[inside], normals[inside])))


def halfspace_representation(field: HalfSpaceField, x, spec: QuadratureSpec,
                             R_schedule: Optional[Sequence[float]] = None,
                             delta: Optional[float] = None) -> HalfSpaceReport:
    """
        Truncated integrals ∫_{B_R^+} G_R^+(x, y) (-Δ)^m u(y) dy over a growing schedule of radii,
        with the boundary discrepancy ∮_{∂B_R^+} |x - y|^{-N} S(y) ds and its ε-split bound.
        The field is translated so that x = (x_1, 0, ..., 0).

        :raises ScheduleTooSmall: when a radius does not exceed 2 x_1 or the schedule is not increasing
        :raises NonMonotoneSequence: when a truncated integral decreases beyond quadrature accuracy
    """
    params = field.params
    x = as_points(params, x)
    x1 = float(x[0])
    if x1 <= 0:
        raise OutsideDomain(message="Representation point must satisfy x_1 > 0")
    schedule = list(R_schedule) if R_schedule is not None else default_schedule(x1)
    if not schedule or any(R <= 2 * x1 for R in schedule) or any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ScheduleTooSmall(message="Radii must increase and exceed 2 x_1 = {}".format(2 * x1))
    delta = x1 if delta is None else delta

    shift = x.copy()
    shift[0] = 0.0
    axis_point = np.zeros(params.N)
    axis_point[0] = x1
    source = lambda Y: field.source(Y + shift)

    def weight_on(R):
        def weight(Y):
            normals = Y.copy()
            normals[:, 0] -= R
            return field.boundary_weight(Y + shift, normals / R)
        return weight

    values, errors, discrepancy, split_bounds = [], [], [], []
    for R in schedule:
        geom = BallGeometry.shifted_ball(R, params.N)
        result = integrate_ball_with_error(
            lambda Y: green_unchecked(params, geom, axis_point, Y) * source(Y), geom, spec, singular_at=axis_point)
        if values:
            slack = max(1e-10 * (1 + abs(result.value)), 2 * (result.error + errors[-1]))
            if result.value < values[-1] - slack:
                raise NonMonotoneSequence(message="Truncated integral decreased from {:.12e} to {:.12e} at R={}".format(
                    values[-1], result.value, R))
        values.append(result.value)
        errors.append(result.error)

        full_cap = CapRange(a=0.0, b=2 * R, R=R)
        discrepancy.append(cap_surface_integral(full_cap, axis_point, spec, weight=weight_on(R)))
        cut = min(delta, 2 * R)
        eps = boundary_smallness_profile(field, cut, R)
        c6 = boundary_smallness_profile(field, 2 * R, R)
        split_bounds.append(
            eps * cap_surface_integral(CapRange(a=0.0, b=cut, R=R), axis_point, spec)
            + c6 * cap_surface_integral(CapRange(a=cut, b=2 * R, R=R), axis_point, spec))
        logger.info("Half-space representation R=%g: %.12e (quadrature error %.1e)", R, result.value, result.error)

    exponent = None
    positive = [(R, d) for R, d in zip(schedule, discrepancy) if d > 0]
    if len(positive) >= 3:
        exponent = float(np.polyfit(np.log([p[0] for p in positive]), np.log([p[1] for p in positive]), 1)[0])
    return HalfSpaceReport(
        params=params, x=tuple(float(c) for c in x), radii=[float(R) for R in schedule], values=values,
        errors=errors, cauchy_gaps=[b - a for a, b in zip(values, values[1:])], boundary_discrepancy=discrepancy,
        split_bounds=split_bounds, discrepancy_exponent=exponent,
    )
