import logging
import math
from functools import lru_cache
from typing import Callable, NamedTuple, Optional, Tuple

import numpy as np
from scipy import integrate
from scipy.special import roots_jacobi, roots_legendre

from kernels import domain_gap
from models.errors import BudgetExceeded, DegenerateCap, OutsideDomain
from models.schemas import BallGeometry, CapRange, QuadratureSpec

logger = logging.getLogger(__name__)

Integrand = Callable[[np.ndarray], np.ndarray]

_CHUNK_POINTS = 200_000
_MAX_DYADIC_LEVELS = 60


class QuadratureResult(NamedTuple):
    value: float
    error: float
    level: int
    nodes: int


def unit_sphere_area(N: int) -> float:
    """|S^{N-1}| = 2 π^{N/2} / Γ(N/2)."""
    return 2 * math.pi ** (N / 2) / math.gamma(N / 2)


@lru_cache(maxsize=64)
def sphere_rule(N: int, polar_order: int, inner_order: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
        Product rule on S^{N-1}: Gauss-Jacobi in the first coordinate t with weight
        (1 - t^2)^{(N-3)/2}, recursively times a rule on S^{N-2}; trapezoid rule on S^1.
        Weights are positive and sum to |S^{N-1}|.
    """
    inner_order = polar_order if inner_order is None else inner_order
    if N == 1:
        nodes, weights = np.array([[-1.0], [1.0]]), np.array([1.0, 1.0])
    elif N == 2:
        count = 2 * polar_order
        angles = 2 * math.pi * (np.arange(count) + 0.5) / count
        nodes = np.column_stack([np.cos(angles), np.sin(angles)])
        weights = np.full(count, 2 * math.pi / count)
    else:
        a = (N - 3) / 2
        t, w = roots_jacobi(polar_order, a, a)
        inner_nodes, inner_weights = sphere_rule(N - 1, inner_order, inner_order)
        sine = np.sqrt(1.0 - t ** 2)
        nodes = np.concatenate([
            np.column_stack([np.full(len(inner_nodes), ti), si * inner_nodes]) for ti, si in zip(t, sine)
        ])
        weights = np.concatenate([wi * inner_weights for wi in w])
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def _rotation_to(axis: np.ndarray) -> np.ndarray:
    """Householder reflection sending e_1 to `axis`."""
    N = len(axis)
    v = -axis.copy()
    v[0] += 1.0
    norm2 = float(v @ v)
    if norm2 < 1e-28:
        return np.eye(N)
    return np.eye(N) - 2.0 * np.outer(v, v) / norm2


def _level_orders(spec: QuadratureSpec, N: int, level: int) -> Tuple[int, int, int]:
    polar = spec.angular_order + 4 * level
    inner = polar if N <= 4 else min(polar, max(3, spec.angular_order // 2 + level))
    radial = spec.radial_order + 4 * level
    return polar, inner, radial


def _panel_rule(edges: np.ndarray, order: int) -> Tuple[np.ndarray, np.ndarray]:
    x, w = roots_legendre(order)
    lo, hi = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (hi - lo) * x[None, :] + 0.5 * (hi + lo)
    weights = 0.5 * (hi - lo) * w[None, :]
    return nodes.ravel(), weights.ravel()


def _radial_edges(spec: QuadratureSpec, level: int, singular: bool, extra_levels: int) -> np.ndarray:
    outer_panels = 2 + level
    if not singular:
        return np.linspace(0.0, 1.0, outer_panels + 1)
    split = spec.singularity_split_radius
    dyadic = min(6 + 2 * level + extra_levels, _MAX_DYADIC_LEVELS)
    inner = split * 2.0 ** -np.arange(dyadic, -1, -1, dtype=float)
    outer = split + (1 - split) * np.arange(1, outer_panels + 1) / outer_panels
    return np.concatenate([[0.0], inner, outer])


def _ball_rule_value(f: Integrand, origin: np.ndarray, gap: float, directions: np.ndarray,
                     dir_weights: np.ndarray, offset: np.ndarray, frac_nodes: np.ndarray,
                     frac_weights: np.ndarray) -> float:
    N = len(origin)
    K = len(frac_nodes)
    chunk = max(1, _CHUNK_POINTS // K)
    total = 0.0
    for start in range(0, len(directions), chunk):
        dirs = directions[start:start + chunk]
        b = dirs @ offset
        root = np.sqrt(np.maximum(b * b + gap, 0.0))
        # distance to the sphere along each direction, both branches free of cancellation
        rho_max = np.where(b > 0, gap / np.where(b > 0, b + root, 1.0), root - b)
        rho = rho_max[:, None] * frac_nodes[None, :]
        pts = origin + rho[..., None] * dirs[:, None, :]
        values = np.asarray(f(pts.reshape(-1, N)), dtype=float).reshape(len(dirs), K)
        radial = (values * rho ** (N - 1)) @ frac_weights
        total += float(dir_weights[start:start + chunk] @ (rho_max * radial))
    return total


def integrate_ball_with_error(f: Integrand, geom: BallGeometry, spec: QuadratureSpec,
                              singular_at: Optional[np.ndarray] = None) -> QuadratureResult:
    """
        Integral of a vectorized integrand over a ball (or shifted ball) in polar coordinates about
        the singular point (or the center). The Jacobian ρ^{N-1} absorbs |y-x|^{2m-N} singularities;
        radial panels are graded dyadically toward the singular point.

        Refinement raises all orders level by level until two consecutive levels agree to
        `target_rel_error`.

        :raises BudgetExceeded: when `max_subdivisions` levels do not reach the tolerance
    """
    if geom.is_half_space:
        raise OutsideDomain(message="Volume integrals need a finite ball")
    N = geom.dim
    center = geom.center
    R = geom.radius
    singular = singular_at is not None
    origin = center.copy() if not singular else np.asarray(singular_at, dtype=float)
    gap = float(R ** 2 - np.sum((origin - center) ** 2)) if not geom.shifted else float(domain_gap(geom, origin))
    if gap < -4 * np.finfo(float).eps * R ** 2:
        raise OutsideDomain(message="Singular point lies outside the ball")
    gap = max(gap, 0.0)
    offset = origin - center
    dist_center = float(np.linalg.norm(offset))
    axis = offset / dist_center if dist_center > 1e-14 * R else np.eye(N)[0]
    rotation = _rotation_to(axis)
    extra = 0
    if singular:
        boundary_distance = max(R - dist_center, 1e-12 * R)
        extra = max(0, int(math.ceil(math.log2(spec.singularity_split_radius * (R + dist_center) / boundary_distance))))

    previous = None
    for level in range(spec.max_subdivisions + 1):
        polar, inner, radial = _level_orders(spec, N, level)
        nodes, weights = sphere_rule(N, polar, inner)
        directions = nodes @ rotation
        frac_nodes, frac_weights = _panel_rule(_radial_edges(spec, level, singular, extra), radial)
        value = _ball_rule_value(f, origin, gap, directions, weights, offset, frac_nodes, frac_weights)
        count = len(directions) * len(frac_nodes)
        if previous is not None:
            error = abs(value - previous)
            logger.debug("Ball quadrature level %d: value %.15e, error %.3e, nodes %d", level, value, error, count)
            if error <= spec.target_rel_error * abs(value) + spec.abs_floor:
                return QuadratureResult(value=value, error=error, level=level, nodes=count)
        previous = value
    raise BudgetExceeded(message="Ball quadrature did not reach {:.1e} within {} levels".format(
        spec.target_rel_error, spec.max_subdivisions))


def integrate_ball(f: Integrand, geom: BallGeometry, spec: QuadratureSpec,
                   singular_at: Optional[np.ndarray] = None) -> float:
    return integrate_ball_with_error(f, geom, spec, singular_at).value


def sphere_integral_with_error(f: Integrand, center: np.ndarray, r: float, spec: QuadratureSpec) -> QuadratureResult:
    center = np.asarray(center, dtype=float)
    N = len(center)
    if r <= 0:
        raise ValueError("Sphere radius must be positive, got {}".format(r))
    previous = None
    for level in range(spec.max_subdivisions + 1):
        polar, inner, _ = _level_orders(spec, N, level)
        nodes, weights = sphere_rule(N, polar, inner)
        value = r ** (N - 1) * float(weights @ np.asarray(f(center + r * nodes), dtype=float))
        if previous is not None:
            error = abs(value - previous)
            if error <= spec.target_rel_error * abs(value) + spec.abs_floor:
                return QuadratureResult(value=value, error=error, level=level, nodes=len(nodes))
        previous = value
    raise BudgetExceeded(message="Sphere quadrature did not reach {:.1e} within {} levels".format(
        spec.target_rel_error, spec.max_subdivisions))


def sphere_integral(f: Integrand, center: np.ndarray, r: float, spec: QuadratureSpec) -> float:
    """Surface integral of a vectorized integrand over ∂B_r(center)."""
    return sphere_integral_with_error(f, center, r, spec).value


def spherical_average(w: Integrand, r: float, spec: QuadratureSpec, dim: int) -> float:
    """
        (1 / (r^{N-1} |S^{N-1}|)) ∮_{∂B_r(0)} w ds; r = 0 gives w(0).
    """
    if r < 0:
        raise ValueError("Averaging radius must be nonnegative, got {}".format(r))
    if r == 0:
        return float(np.asarray(w(np.zeros((1, dim))))[0])
    return sphere_integral(w, np.zeros(dim), r, spec) / (r ** (dim - 1) * unit_sphere_area(dim))


# Spherical caps on ∂B_R^+

def theta_map(angles: np.ndarray) -> np.ndarray:
    """
        Hyperspherical parameterization θ of S^{d-1} from angles (φ_1, ..., φ_{d-1}),
        φ_1 ∈ [0, 2π), the others in [0, π]: θ = (cos φ_{d-1}, sin φ_{d-1} θ'(φ_1, ..., φ_{d-2})).
    """
    angles = np.atleast_2d(angles)
    out = np.column_stack([np.cos(angles[:, 0]), np.sin(angles[:, 0])])
    for j in range(1, angles.shape[1]):
        phi = angles[:, j]
        out = np.column_stack([np.cos(phi), np.sin(phi)[:, None] * out])
    return out


def theta_jacobian(angles: np.ndarray) -> np.ndarray:
    """|det Dθ| = ∏_{j>=2} sin^{j-1} φ_j."""
    angles = np.atleast_2d(angles)
    jac = np.ones(len(angles))
    for j in range(1, angles.shape[1]):
        jac *= np.abs(np.sin(angles[:, j])) ** j
    return jac


@lru_cache(maxsize=32)
def cap_angular_rule(N: int, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """
        Nodes θ_k on S^{N-2} and weights approximating ∫ g(θ(φ)) |det Dθ| dφ; for N = 2 the two
        branches ±1.
    """
    if N == 2:
        nodes, weights = np.array([[-1.0], [1.0]]), np.array([1.0, 1.0])
    elif N == 3:
        count = 2 * order
        angles = (2 * math.pi * (np.arange(count) + 0.5) / count)[:, None]
        nodes, weights = theta_map(angles), np.full(count, 2 * math.pi / count)
    else:
        x, w = roots_legendre(order)
        polar, polar_w = 0.5 * math.pi * (x + 1), 0.5 * math.pi * w
        count = 2 * order
        azimuth = 2 * math.pi * (np.arange(count) + 0.5) / count
        grids = np.meshgrid(azimuth, *([polar] * (N - 3)), indexing="ij")
        angles = np.column_stack([g.ravel() for g in grids])
        wgrids = np.meshgrid(np.full(count, 2 * math.pi / count), *([polar_w] * (N - 3)), indexing="ij")
        weights = np.prod(np.column_stack([g.ravel() for g in wgrids]), axis=1) * theta_jacobian(angles)
        nodes = theta_map(angles)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def cap_points(cap_R: float, y1: float, thetas: np.ndarray) -> np.ndarray:
    """F(y_1, θ) = (y_1, sqrt(2R y_1 - y_1^2) θ) on ∂B_R^+."""
    radius = math.sqrt(max(2 * cap_R * y1 - y1 * y1, 0.0))
    return np.column_stack([np.full(len(thetas), y1), radius * thetas])


def cap_surface_integral(cap: CapRange, x: np.ndarray, spec: QuadratureSpec,
                         weight: Optional[Integrand] = None) -> float:
    """
        ∮ over {y ∈ ∂B_R^+ : a <= y_1 <= b} of |x - y|^{-N} (times `weight(y)` when given),
        x = (x_1, 0, ..., 0). Uses |x - F(y_1, θ)|^2 = x_1^2 + 2R y_1 - 2 x_1 y_1 and the surface
        element R (2R y_1 - y_1^2)^{(N-3)/2} |det Dθ| dy_1 dφ. The y_1-integral is taken in the
        variable y_1 = R(1 - cos β), which removes the endpoint singularities of the surface element.

        :raises DegenerateCap: when x is not of the form (x_1, 0, ..., 0) with 0 < x_1 <= R/2
    """
    x = np.asarray(x, dtype=float)
    N = len(x)
    R = cap.R
    x1 = float(x[0])
    if N < 2 or np.any(x[1:] != 0) or not 0 < x1 <= R / 2:
        raise DegenerateCap(message="Cap integrals need x = (x_1, 0, ..., 0) with 0 < x_1 <= R/2")
    if cap.a == cap.b:
        return 0.0
    beta_a = math.acos(min(1.0, max(-1.0, 1 - cap.a / R)))
    beta_b = math.acos(min(1.0, max(-1.0, 1 - cap.b / R)))
    if weight is None:
        area = unit_sphere_area(N - 1)
        angular = lambda beta: area
    else:
        thetas, weights = cap_angular_rule(N, spec.angular_order + 8)
        angular = lambda beta: float(weights @ weight(cap_points(R, R * (1 - math.cos(beta)), thetas)))

    def integrand(beta):
        y1 = R * (1 - math.cos(beta))
        distance2 = x1 * x1 + 2 * y1 * (R - x1)
        return R ** (N - 1) * math.sin(beta) ** (N - 2) * distance2 ** (-N / 2) * angular(beta)

    # the integrand peaks on the angular scale x_1/R
    breaks = [c * x1 / R for c in (0.25, 1.0, 4.0, 16.0) if beta_a < c * x1 / R < beta_b]
    value, error = integrate.quad(integrand, beta_a, beta_b, points=breaks or None, epsabs=0.0,
                                  epsrel=max(spec.target_rel_error, 1e-13), limit=400)
    logger.debug("Cap integral over [%g, %g], R=%g: %.12e (error %.1e)", cap.a, cap.b, R, value, error)
    return value
