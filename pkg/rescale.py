import logging
from typing import Optional, Sequence

import numpy as np

from models.domain import CoefficientMap, ScalarField
from models.schemas import KernelParams, RescaleSpec, VanishingReport
from ode1d import Nonlinearity1D, Trajectory
from settings import get_settings
from utils.finite_differences import mixed_partial, richardson
from utils.sampling import ball_points

logger = logging.getLogger(__name__)

settings = get_settings()


def rescale_field(spec: RescaleSpec, u: ScalarField) -> ScalarField:
    """v(y) = u(M^{(1-q)/2m} y + x0) / M."""
    scale, center, M = spec.scale, spec.center, spec.M

    def v(y):
        return u(scale * np.asarray(y, dtype=float) + center) / M
    return v


def derivative_scaling_factor(spec: RescaleSpec, order: int) -> float:
    """D^α v(y) = M^{(1-q)|α|/2m - 1} (D^α u)(M^{(1-q)/2m} y + x0) for |α| = order."""
    p = spec.params
    return spec.M ** ((1 - p.q) * order / (2 * p.m) - 1)


def coefficient_prefactor(spec: RescaleSpec, order: int) -> float:
    p = spec.params
    if order == 2 * p.m:
        return 1.0
    return spec.M ** ((p.q - 1) * (order / (2 * p.m) - 1))


def rescale_coefficient(spec: RescaleSpec, c: CoefficientMap) -> CoefficientMap:
    """
        c̄(y) = M^{(q-1)(|α|/2m - 1)} c(M^{(1-q)/2m} y + x0). Top-order coefficients (|α| = 2m) are
        only translated and dilated.
    """
    if c.degree > 2 * spec.params.m:
        raise ValueError("Coefficient order {} exceeds 2m = {}".format(c.degree, 2 * spec.params.m))
    prefactor = coefficient_prefactor(spec, c.degree)
    scale, center = spec.scale, spec.center

    def values(y):
        return prefactor * c.values(scale * np.asarray(y, dtype=float) + center)
    return CoefficientMap(order=c.order, values=values)


def compose(first: RescaleSpec, second: RescaleSpec) -> RescaleSpec:
    """Single rescale equal to applying `first`, then `second` to the result."""
    if first.params != second.params:
        raise ValueError("Composed rescales must share their parameters")
    x0 = first.scale * second.center + first.center
    return RescaleSpec(M=first.M * second.M, x0=tuple(float(c) for c in x0), params=first.params)


def shift_first_axis(v: ScalarField, tau: float) -> ScalarField:
    """w(z) = v(z_1 - τ, z')."""
    def w(z):
        z = np.array(z, dtype=float)
        z[..., 0] -= tau
        return v(z)
    return w


def lower_order_vanishing(M_values: Sequence[float], c: CoefficientMap, params: KernelParams,
                          x0: Optional[Sequence[float]] = None, samples: Optional[np.ndarray] = None,
                          seed: Optional[int] = None) -> VanishingReport:
    """
        Sup-norms of the rescaled coefficient over sample points of the unit ball, for each M, and the
        log-log slope fitted against the exponent (q-1)(|α|/2m - 1).
    """
    if c.degree > 2 * params.m - 1:
        raise ValueError("Lower-order coefficients need |α| <= 2m-1, got {}".format(c.degree))
    if len(M_values) < 2:
        raise ValueError("Need at least two values of M")
    seed = settings.DEFAULT_SEED if seed is None else seed
    x0 = tuple(float(v) for v in x0) if x0 is not None else (0.0,) * params.N
    samples = samples if samples is not None else ball_points(256, params.N, seed)
    sup_norms = []
    for M in M_values:
        spec = RescaleSpec(M=M, x0=x0, params=params)
        sup_norms.append(float(np.max(np.abs(rescale_coefficient(spec, c).values(samples)))))
    slope = float(np.polyfit(np.log(M_values), np.log(sup_norms), 1)[0])
    expected = (params.q - 1) * (c.degree / (2 * params.m) - 1)
    logger.debug("Lower-order vanishing for order %s: slope %.4f, expected %.4f", c.order, slope, expected)
    return VanishingReport(order=c.order, M_values=[float(M) for M in M_values], sup_norms=sup_norms,
                           expected_exponent=expected, fitted_slope=slope)


def equation_covariance_residual(trajectory: Trajectory, spec: RescaleSpec, nl: Nonlinearity1D, y: Sequence[float],
                                 h: float = 0.05) -> float:
    """
        max |-v''(y) - f(v(y))| for the rescale v of a trajectory solving -u'' = f(u), f homogeneous of degree q.

        v itself comes from `rescale_field` applied to the dense output, v' from the first-order derivative law and
        v'' from a Richardson-extrapolated central difference of v'. The pulled-back samples must stay inside the
        integrated interval.
    """
    if trajectory.m != 1 or spec.params.m != 1 or spec.params.N != 1:
        raise ValueError("Equation covariance is checked for m = 1 in one dimension")
    Y = np.asarray(y, dtype=float).reshape(-1, 1)
    pulled = spec.scale * Y[:, 0] + spec.center[0]
    lo, hi = float(np.min(trajectory.t)), float(np.max(trajectory.t))
    reach = spec.scale * h
    if pulled.min() - reach < lo or pulled.max() + reach > hi:
        raise ValueError("Samples pull back outside the integrated interval [{}, {}]".format(lo, hi))
    dense = trajectory.dense()
    v = rescale_field(spec, lambda X: dense(X[:, 0])[0])
    dv_factor = derivative_scaling_factor(spec, 1)

    def dv(points):
        return dv_factor * dense(spec.scale * points[:, 0] + spec.center[0])[1]

    d2v = richardson(lambda step: mixed_partial(dv, Y, (1,), step), np.array([h]))
    f = np.vectorize(nl.f, otypes=[float])
    residual = float(np.max(np.abs(-d2v - f(v(Y)))))
    logger.debug("Equation covariance residual %.3e over %d samples (M=%g)", residual, len(Y), spec.M)
    return residual
