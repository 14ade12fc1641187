import logging
from typing import Callable, Dict, Optional

import numpy as np
from scipy import optimize

from kernels import as_points, green
from models.domain import GridFunction, SampleSet, ScalarField
from models.errors import IncompatibleLattice
from models.schemas import (
    BallGeometry, InequalityReport, KernelParams, PointwiseBoundReport, ReflectionReport, ReflectionSpec, SampleLabel
)
from settings import get_settings
from utils.sampling import ball_points, pairs_in_ball

logger = logging.getLogger(__name__)

settings = get_settings()

_PREDICATE_TOL = 1e-12
_MAX_DRAWS = 64
_POLISH_STARTS = 4


def reflect(spec: ReflectionSpec, x) -> np.ndarray:
    """x^λ = x - 2(x·e - λ)e."""
    x = np.asarray(x, dtype=float)
    e = spec.direction
    offset = x @ e - spec.lam
    return x - 2.0 * np.multiply.outer(offset, e)


def _draw(n: int, dim: int, seed: int, predicate: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    accepted, count = [], 0
    for draw in range(_MAX_DRAWS):
        batch = ball_points(max(4 * n, 64), dim, seed + draw)
        keep = batch[predicate(batch)]
        accepted.append(keep)
        count += len(keep)
        if count >= n:
            return np.concatenate(accepted)[:n]
    raise ValueError("Could not draw {} admissible points; the sampled set is too thin".format(n))


def _in_h_lambda(spec: ReflectionSpec):
    return lambda X: X @ spec.direction > spec.lam


def _in_j_lambda(spec: ReflectionSpec):
    return lambda X: (X @ spec.direction < spec.lam) & (np.sum(reflect(spec, X) ** 2, axis=1) > 1.0)


def sample_h_lambda(spec: ReflectionSpec, n_samples: int, seed: Optional[int] = None) -> SampleSet:
    """Points of H_λ ∩ B, i.e. x·e > λ and |x| < 1."""
    seed = settings.DEFAULT_SEED if seed is None else seed
    points = _draw(n_samples, len(spec.e), seed, _in_h_lambda(spec))
    return SampleSet(points=points, label=SampleLabel.h_lambda_cap_b)


def sample_j_lambda(spec: ReflectionSpec, n_samples: int, seed: Optional[int] = None) -> SampleSet:
    """Points of J_λ = {x ∈ B : x·e < λ, |x^λ| > 1}."""
    seed = settings.DEFAULT_SEED if seed is None else seed
    points = _draw(n_samples, len(spec.e), seed, _in_j_lambda(spec))
    return SampleSet(points=points, label=SampleLabel.j_lambda)


def sample_w_mu(v: ScalarField, spec: ReflectionSpec, n_samples: int, seed: Optional[int] = None) -> SampleSet:
    """
        Points of W_μ = {x ∈ H_μ ∩ B : v(x^μ) - v(x) < 0}; may hold fewer than n_samples points,
        down to none, when w_μ is nonnegative on most of H_μ.
    """
    seed = settings.DEFAULT_SEED if seed is None else seed
    candidates = sample_h_lambda(spec, n_samples, seed).points
    w = v(reflect(spec, candidates)) - v(candidates)
    return SampleSet(points=candidates[w < 0], label=SampleLabel.w_mu)


def satisfies_label(sample: SampleSet, spec: ReflectionSpec, v: Optional[ScalarField] = None) -> bool:
    X = sample.points
    if len(X) == 0:
        return True
    inside = np.sum(X * X, axis=1) < 1.0 + _PREDICATE_TOL
    side = X @ spec.direction - spec.lam
    if sample.label == SampleLabel.h_lambda_cap_b:
        return bool(np.all(inside & (side > -_PREDICATE_TOL)))
    if sample.label == SampleLabel.j_lambda:
        outside = np.sum(reflect(spec, X) ** 2, axis=1) > 1.0 - _PREDICATE_TOL
        return bool(np.all(inside & (side < _PREDICATE_TOL) & outside))
    if v is None:
        raise ValueError("W_mu membership needs the field v")
    return bool(np.all(inside & (side > -_PREDICATE_TOL) & (v(reflect(spec, X)) - v(X) < _PREDICATE_TOL)))


def reflection_margins(params: KernelParams, spec: ReflectionSpec, X: np.ndarray, Y: np.ndarray,
                       Yj: np.ndarray) -> Dict[str, np.ndarray]:
    """
        Raw margins (left minus right side) and the magnitudes they are compared against, per
        inequality family. X, Y sample H_λ ∩ B; Yj samples J_λ.
    """
    geom = BallGeometry.unit(params.N)
    g = lambda a, b: np.atleast_1d(green(params, geom, a, b))
    Xl, Yl = reflect(spec, X), reflect(spec, Y)
    g_ll, g_xl, g_xy, g_lx = g(Xl, Yl), g(X, Yl), g(X, Y), g(Xl, Y)
    g_lj, g_xj = g(Xl, Yj), g(X, Yj)

    def weight(P):
        shifted = P.copy()
        shifted[:, 0] += 1.0
        return np.sum(shifted * shifted, axis=1) ** (-params.alpha / 2)

    w_x, w_l = weight(X), weight(Xl)
    return {
        "green_reflection": (g_ll - g_xl, np.abs(g_ll) + np.abs(g_xl)),
        "green_difference": ((g_ll - g_xy) - (g_xl - g_lx), np.abs(g_ll) + np.abs(g_xy) + np.abs(g_xl) + np.abs(g_lx)),
        "green_j_lambda": (g_lj - g_xj, np.abs(g_lj) + np.abs(g_xj)),
        "weight_comparison": (w_l - w_x, np.abs(w_l) + np.abs(w_x)),
    }


def check_reflection_inequalities(params: KernelParams, spec: ReflectionSpec, n_samples: int,
                                  margin_tol: float = 1e-12, seed: Optional[int] = None) -> ReflectionReport:
    """
        Samples the reflection inequalities of the unit-ball Green function on H_λ ∩ B and J_λ.
        Violations are counted, not raised: a margin below -margin_tol (1 + magnitude) is a violation.
    """
    if not 0 < spec.lam < 1:
        raise ValueError("Reflection level must lie in (0, 1), got {}".format(spec.lam))
    if n_samples < 1:
        raise ValueError("Need at least one sample")
    if len(spec.e) != params.N:
        raise ValueError("Reflection direction has dimension {}, expected {}".format(len(spec.e), params.N))
    seed = settings.DEFAULT_SEED if seed is None else seed
    X = sample_h_lambda(spec, n_samples, seed).points
    Y = sample_h_lambda(spec, n_samples, seed + 101).points
    Yj = sample_j_lambda(spec, n_samples, seed + 202).points

    inequalities = []
    for name, (margin, magnitude) in reflection_margins(params, spec, X, Y, Yj).items():
        violations = int(np.count_nonzero(margin < -margin_tol * (1.0 + magnitude)))
        if violations:
            logger.warning("Reflection inequality %s: %d violations (min margin %.3e)", name, violations,
                           float(margin.min()))
        inequalities.append(InequalityReport(
            inequality_id=name, samples=len(margin), min_margin=float(margin.min()), violations=violations))
    return ReflectionReport(params=params, lam=spec.lam, e=spec.e, inequalities=inequalities)


def axial_symmetry_defect(field: GridFunction) -> float:
    """Max over rotation orbits about the x_1-axis of (max - min) / (1 + |mean|)."""
    if field.orbits is None:
        raise IncompatibleLattice(message="Field carries no rotation-orbit metadata")
    ids, inverse, counts = np.unique(field.orbits, return_inverse=True, return_counts=True)
    if np.any(counts < 2):
        raise IncompatibleLattice(message="Every rotation orbit needs at least two nodes")
    order = np.argsort(inverse, kind="stable")
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    values = field.values[order]
    highs = np.maximum.reduceat(values, starts)
    lows = np.minimum.reduceat(values, starts)
    means = np.add.reduceat(values, starts) / counts
    return float(np.max((highs - lows) / (1.0 + np.abs(means))))


def _to_ball(u: np.ndarray) -> np.ndarray:
    return u / np.sqrt(1 + np.sum(u * u, axis=-1, keepdims=True))


def _from_ball(x: np.ndarray) -> np.ndarray:
    r2 = np.minimum(np.sum(x * x, axis=-1, keepdims=True), 1 - 1e-12)
    return x / np.sqrt(1 - r2)


def _polish_max_ratio(params: KernelParams, X: np.ndarray, Y: np.ndarray, ratios: np.ndarray) -> float:
    # local ascent from the best sampled pairs; the unconstrained variables map onto the open ball
    N = params.N

    def objective(z):
        x, y = _to_ball(z.reshape(2, N))
        if np.linalg.norm(x - y) < 1e-12:
            return 0.0
        return -float(pointwise_ratios(params, x, y)[0])

    best = float(ratios.max())
    for i in np.argsort(ratios)[-_POLISH_STARTS:]:
        start = _from_ball(np.stack([X[i], Y[i]])).ravel()
        result = optimize.minimize(objective, start, method="L-BFGS-B", options={"maxiter": 300})
        best = max(best, -float(result.fun))
    return best


def kernel_pointwise_bound_check(params: KernelParams, n_samples: int, seed: Optional[int] = None,
                                 shrink: float = 1.0, polish: bool = True) -> PointwiseBoundReport:
    """
        Empirical c_{N,m} in 0 < G_1(x, y) <= c |x - y|^{1-N}. With `polish` the best sampled pairs are
        refined by local ascent before the maximum is reported.
    """
    if params.N < 2:
        raise ValueError("The pointwise bound needs N >= 2")
    seed = settings.DEFAULT_SEED if seed is None else seed
    X, Y = pairs_in_ball(n_samples, params.N, seed, shrink=shrink)
    ratios = pointwise_ratios(params, X, Y)
    sampled = float(ratios.max())
    max_ratio = _polish_max_ratio(params, X, Y, ratios) if polish else sampled
    logger.debug("Pointwise bound for N=%d, m=%d: sampled %.6g, polished %.6g", params.N, params.m, sampled, max_ratio)
    return PointwiseBoundReport(params=params, samples=len(ratios), max_ratio=max_ratio, sampled_max_ratio=sampled,
                                median_ratio=float(np.median(ratios)))


def pointwise_ratios(params: KernelParams, X, Y) -> np.ndarray:
    X, Y = np.atleast_2d(as_points(params, X)), np.atleast_2d(as_points(params, Y))
    values = np.atleast_1d(green(params, BallGeometry.unit(params.N), X, Y))
    return values * np.linalg.norm(X - Y, axis=1) ** (params.N - 1)
