import logging
import math
from functools import lru_cache
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import polynomial
from scipy.special import beta, betainc, comb

from models.errors import (
    CoincidentPoints, DimensionMismatch, InfiniteProfile, NonFiniteValue, OutsideDomain, StepUnderflow
)
from models.schemas import BallGeometry, KernelParams
from utils.finite_differences import mixed_partial, richardson
from utils.sampling import halton, sphere_points

logger = logging.getLogger(__name__)

ArrayOrFloat = Union[float, np.ndarray]

_SERIES_TERMS = 90
_DOMAIN_SLACK = 4 * np.finfo(float).eps


def normalization_constant(m: int, N: int) -> float:
    """
        k_N^m = 1 / (N e_N 4^{m-1} ((m-1)!)^2), e_N the volume of the unit ball.
    """
    unit_ball = math.pi ** (N / 2) / math.gamma(N / 2 + 1)
    return 1.0 / (N * unit_ball * 4 ** (m - 1) * math.factorial(m - 1) ** 2)


def as_points(params: KernelParams, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != params.N:
        raise DimensionMismatch(message="Point of dimension {} given for N={}".format(x.shape[-1], params.N))
    return x


# Profile

def _profile_series(s: np.ndarray, m: int, b: float) -> np.ndarray:
    # int_0^s σ^{m-1}(1-σ)^{b-1} dσ expanded in s, |s| <= 1/2
    # (-1)^k C(b-1, k) = (1-b)_k / k!, finite for integer b <= 0 as well
    k = np.arange(1, _SERIES_TERMS)
    rising = np.concatenate(([1.0], np.cumprod((k - b) / k)))
    coeffs = rising / (m + np.arange(_SERIES_TERMS))
    return s ** m * polynomial.polyval(s, coeffs)


def _profile_power_sum(w: np.ndarray, m: int, N: int) -> np.ndarray:
    # int_1^w (ω-1)^{m-1} ω^{-N/2} dω, binomial expansion of (ω-1)^{m-1}
    log_w = np.log(w)
    total = np.zeros_like(w)
    for j in range(m):
        e = j - N / 2 + 1
        term = log_w if e == 0 else np.expm1(e * log_w) / e
        total += comb(m - 1, j) * (-1.0) ** (m - 1 - j) * term
    return total


def profile_unchecked(t: ArrayOrFloat, m: int, N: int) -> np.ndarray:
    """
        Boggio's profile int_0^t z^{m-1} (1+z)^{-N/2} dz for t > -1, including its continuation
        to t in (-1, 0) used by finite differences across the boundary.
    """
    t = np.asarray(t, dtype=float)
    shape = t.shape
    t = np.atleast_1d(t)
    out = np.empty_like(t)
    if np.any(t <= -1):
        raise OutsideDomain(message="Profile argument must exceed -1")
    b = N / 2 - m
    infinite = np.isinf(t)
    if np.any(infinite):
        if b <= 0:
            raise InfiniteProfile(message="Profile diverges at infinity for N={} <= 2m={}".format(N, 2 * m))
        out[infinite] = beta(m, b)
    finite = ~infinite
    s = np.where(finite, t / np.where(finite, 1 + t, 1.0), 0.0)
    small = finite & (np.abs(s) <= 0.5)
    out[small] = _profile_series(s[small], m, b)
    large = finite & ~small
    if b > 0:
        upper = large & (s > 0)
        out[upper] = betainc(m, b, s[upper]) * beta(m, b)
        large = large & ~upper
    out[large] = _profile_power_sum(1 + t[large], m, N)
    return out.reshape(shape)


def boggio_profile(t: ArrayOrFloat, params: KernelParams) -> ArrayOrFloat:
    """
        Returns int_0^t z^{m-1} (1+z)^{-N/2} dz for t >= 0. `t = inf` is accepted when N > 2m.

        :raises OutsideDomain: for negative t
        :raises InfiniteProfile: for t = inf and N <= 2m
    """
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0):
        raise OutsideDomain(message="Profile argument must be nonnegative, got {}".format(t))
    value = profile_unchecked(arr, params.m, params.N)
    return float(value) if value.ndim == 0 else value


# ψ-arguments and Green functions

def _psi_parts(geom: BallGeometry, x: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    diff = x - y
    d2 = np.sum(diff * diff, axis=-1)
    if geom.is_half_space:
        num = 4.0 * x[..., 0] * y[..., 0]
    elif geom.shifted:
        R = geom.radius
        # R^2 - |x - P_R|^2 = 2R x_1 - |x|^2, free of cancellation for large R
        num = (2 * R * x[..., 0] - np.sum(x * x, axis=-1)) * (2 * R * y[..., 0] - np.sum(y * y, axis=-1)) / R ** 2
    else:
        R2 = geom.radius ** 2
        num = (R2 - np.sum(x * x, axis=-1)) * (R2 - np.sum(y * y, axis=-1)) / R2
    return num, d2


def domain_gap(geom: BallGeometry, x: np.ndarray) -> np.ndarray:
    """Nonnegative inside the closed domain."""
    if geom.is_half_space:
        return x[..., 0]
    if geom.shifted:
        return 2 * geom.radius * x[..., 0] - np.sum(x * x, axis=-1)
    return geom.radius ** 2 - np.sum(x * x, axis=-1)


def _check_pair(params: KernelParams, geom: BallGeometry, x, y) -> Tuple[np.ndarray, np.ndarray]:
    if geom.dim != params.N:
        raise DimensionMismatch(message="Geometry of dimension {} used with N={}".format(geom.dim, params.N))
    x = as_points(params, x)
    y = as_points(params, y)
    scale = 1.0 if geom.is_half_space else geom.radius ** 2
    for label, pt in (("x", x), ("y", y)):
        if np.any(domain_gap(geom, pt) < -_DOMAIN_SLACK * scale):
            raise OutsideDomain(message="Point {} lies outside the domain".format(label))
    if np.any(np.all(x == y, axis=-1)):
        raise CoincidentPoints(message="Green function is singular at x = y")
    return x, y


def _to_output(value: np.ndarray) -> ArrayOrFloat:
    return float(value) if np.ndim(value) == 0 else value


def psi(params: KernelParams, geom: BallGeometry, x, y) -> ArrayOrFloat:
    """
        ψ-argument of Boggio's formula for the ball, dilated ball, shifted ball or half-space.
        Accepts single points of shape (N,) or stacks of shape (M, N).
    """
    x, y = _check_pair(params, geom, x, y)
    num, d2 = _psi_parts(geom, x, y)
    return _to_output(np.maximum(num, 0.0) / d2)


def green_unchecked(params: KernelParams, geom: BallGeometry, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """
        Green function without domain checks; the profile continuation makes it well defined slightly
        outside the domain, which finite-difference stencils at the boundary rely on.
    """
    num, d2 = _psi_parts(geom, x, y)
    exponent = (2 * params.m - params.N) / 2
    prefactor = 1.0 if exponent == 0 else d2 ** exponent
    return 0.5 * params.k_norm * prefactor * profile_unchecked(num / d2, params.m, params.N)


def green(params: KernelParams, geom: BallGeometry, x, y) -> ArrayOrFloat:
    """
        (k_N^m / 2) |x-y|^{2m-N} P(ψ(x, y)), P Boggio's profile.

        :raises CoincidentPoints: for x = y
        :raises OutsideDomain: when a point leaves the closed domain
        :raises NonFiniteValue: when the profile evaluation breaks down
    """
    x, y = _check_pair(params, geom, x, y)
    num, d2 = _psi_parts(geom, x, y)
    exponent = (2 * params.m - params.N) / 2
    prefactor = 1.0 if exponent == 0 else d2 ** exponent
    value = 0.5 * params.k_norm * prefactor * profile_unchecked(np.maximum(num, 0.0) / d2, params.m, params.N)
    if not np.all(np.isfinite(value)):
        raise NonFiniteValue(message="Green function is not finite for N={}, m={}".format(params.N, params.m))
    return _to_output(value)


# Derivatives

def _derivative_step(distance: np.ndarray) -> np.ndarray:
    return np.maximum(1e-5, 1e-2 * distance)


def kernel_derivative(params: KernelParams, geom: BallGeometry, x, y, multiindex: Sequence[int]) -> float:
    """
        D_y^k G(x, y) by tensor central differences, h = max(1e-5, 1e-2 |x-y|), one Richardson step.

        :raises StepUnderflow: when the stencil would reach halfway to the singularity
    """
    if geom.is_half_space:
        raise OutsideDomain(message="Derivative probes need a finite geometry")
    k = tuple(int(v) for v in multiindex)
    if len(k) != params.N or any(v < 0 for v in k) or sum(k) > 2 * params.m:
        raise ValueError("Multiindex {} is not admissible for N={}, m={}".format(k, params.N, params.m))
    x, y = _check_pair(params, geom, x, y)
    distance = float(np.linalg.norm(x - y))
    h = float(_derivative_step(distance))
    if sum(k) * h / 2 >= 0.5 * distance:
        raise StepUnderflow(message="Point too close to the singularity (|x-y|={:.3e}) for order {}".format(
            distance, sum(k)))
    return float(_derivative_batch(params, geom, x[None], y[None], k, np.array([h]))[0])


def _derivative_batch(params: KernelParams, geom: BallGeometry, X: np.ndarray, Y: np.ndarray,
                      multiindex: Tuple[int, ...], h: np.ndarray) -> np.ndarray:
    kernel = lambda P: green_unchecked(params, geom, X, P)
    return richardson(lambda hh: mixed_partial(kernel, Y, multiindex, hh), h)


@lru_cache(maxsize=None)
def _laplacian_power_stencil(N: int, j: int) -> Tuple[Tuple[Tuple[int, ...], float], ...]:
    stencil: Dict[Tuple[int, ...], float] = {(0,) * N: 1.0}
    base: Dict[Tuple[int, ...], float] = {(0,) * N: -2.0 * N}
    for axis in range(N):
        for sign in (-1, 1):
            offset = [0] * N
            offset[axis] = sign
            base[tuple(offset)] = 1.0
    for _ in range(j):
        product: Dict[Tuple[int, ...], float] = {}
        for off_a, c_a in stencil.items():
            for off_b, c_b in base.items():
                key = tuple(a + b for a, b in zip(off_a, off_b))
                product[key] = product.get(key, 0.0) + c_a * c_b
        stencil = {key: value for key, value in product.items() if value != 0.0}
    return tuple(sorted(stencil.items()))


def _boundary_step(x: np.ndarray, Y: np.ndarray) -> np.ndarray:
    return 0.02 * np.linalg.norm(Y - x, axis=-1)


def _laplacian_power_at(params, geom, x, Y, j, h):
    stencil = _laplacian_power_stencil(params.N, j)
    total = np.zeros(len(Y))
    for offset, coeff in stencil:
        total += coeff * green_unchecked(params, geom, x, Y + h[:, None] * np.asarray(offset, dtype=float))
    return total / h ** (2 * j)


def laplacian_power_of_kernel(params: KernelParams, geom: BallGeometry, x, Y: np.ndarray, j: int,
                              h: Optional[np.ndarray] = None) -> np.ndarray:
    """Δ_y^j G(x, y) at each row of Y by nested second differences with Richardson extrapolation."""
    x = as_points(params, x)
    Y = np.atleast_2d(as_points(params, Y))
    h = _boundary_step(x, Y) if h is None else np.broadcast_to(h, (len(Y),))
    if j == 0:
        return green_unchecked(params, geom, x, Y)
    return richardson(lambda hh: _laplacian_power_at(params, geom, x, Y, j, hh), h)


def normal_derivative_of_laplacian_power(params: KernelParams, geom: BallGeometry, x, Y: np.ndarray,
                                         normals: np.ndarray, j: int,
                                         h: Optional[np.ndarray] = None) -> np.ndarray:
    """∂_ν Δ_y^j G(x, y) at each row of Y; the whole nested stencil shares one Richardson step."""
    x = as_points(params, x)
    Y = np.atleast_2d(as_points(params, Y))
    h = _boundary_step(x, Y) if h is None else np.broadcast_to(h, (len(Y),))

    def estimate(hh):
        shift = hh[:, None] * normals
        if j == 0:
            plus = green_unchecked(params, geom, x, Y + shift)
            minus = green_unchecked(params, geom, x, Y - shift)
        else:
            plus = _laplacian_power_at(params, geom, x, Y + shift, j, hh)
            minus = _laplacian_power_at(params, geom, x, Y - shift, j, hh)
        return (plus - minus) / (2 * hh)

    return richardson(estimate, h)


def grunau_sweers_ratios(params: KernelParams, n_samples: int, seed: int,
                         orders: Optional[Sequence[int]] = None) -> Dict[int, np.ndarray]:
    """
        Samples |D_y^k G_1(x, y)| |x-y|^{N+|k|-m} / (1-|x|)^m with x = (x_1, 0, ..., 0) interior
        and y on the unit sphere, for pure x_1-derivatives k = |k| e_1.
    """
    geom = BallGeometry.unit(params.N)
    orders = list(orders) if orders is not None else list(range(params.m, 2 * params.m))
    X = np.zeros((n_samples, params.N))
    X[:, 0] = 0.95 * halton(n_samples, 1, seed)[:, 0]
    Y = sphere_points(n_samples, params.N, seed + 1)
    distance = np.linalg.norm(X - Y, axis=1)
    keep = distance > 1e-3
    X, Y, distance = X[keep], Y[keep], distance[keep]
    h = _derivative_step(distance)
    ratios = {}
    for order in orders:
        k = (order,) + (0,) * (params.N - 1)
        values = _derivative_batch(params, geom, X, Y, k, h)
        ratios[order] = np.abs(values) * distance ** (params.N + order - params.m) / (1 - X[:, 0]) ** params.m
        logger.debug("Grunau-Sweers order %d: median ratio %.3e", order, float(np.median(ratios[order])))
    return ratios
