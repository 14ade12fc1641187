import logging
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from kernels import as_points, green, psi
from models.domain import ScalarField
from models.errors import NegativeInput, PoleSingularity
from models.schemas import BallGeometry, KernelParams
from settings import get_settings

logger = logging.getLogger(__name__)

settings = get_settings()


def _pole_offsets(params: KernelParams, y, tolerance: float) -> Tuple[np.ndarray, np.ndarray]:
    """Returns y and |y + e_1|^2, rejecting points within `tolerance` of the pole -e_1."""
    y = as_points(params, y)
    shifted = y.copy()
    shifted[..., 0] += 1.0
    r2 = np.sum(shifted * shifted, axis=-1)
    if np.any(r2 < tolerance ** 2):
        raise PoleSingularity(message="Point within {:.0e} of the pole -e_1".format(tolerance))
    return y, r2


def _output(value):
    return float(value) if np.ndim(value) == 0 else value


@dataclass(frozen=True)
class ConformalMap:
    """
        The Möbius map φ(y) = 2(y + e_1)/|y + e_1|^2 - e_1 carrying the unit ball onto {x_1 > 0}.
        φ is an inversion, hence its own inverse.
    """
    params: KernelParams
    pole_exclusion: float = field(default_factory=lambda: settings.POLE_EXCLUSION)

    def phi(self, y) -> np.ndarray:
        y, r2 = _pole_offsets(self.params, y, self.pole_exclusion)
        out = 2.0 * y / r2[..., None]
        # first coordinate written as (1 - |y|^2)/|y + e_1|^2 to keep boundary images exactly on x_1 = 0
        out[..., 0] = (1.0 - np.sum(y * y, axis=-1)) / r2
        return out

    def phi_inverse(self, x) -> np.ndarray:
        return self.phi(x)

    def jacobian_det(self, y):
        _, r2 = _pole_offsets(self.params, y, self.pole_exclusion)
        return _output(2.0 ** self.params.N / r2 ** self.params.N)

    def conformal_factor(self, y):
        """|y + e_1|, the distance to the pole."""
        _, r2 = _pole_offsets(self.params, y, self.pole_exclusion)
        return _output(np.sqrt(r2))

    def pullback_solution(self, u: ScalarField) -> ScalarField:
        """v(x) = |x + e_1|^{2m-N} u(φ(x))."""
        exponent = (2 * self.params.m - self.params.N) / 2

        def v(x):
            x, r2 = _pole_offsets(self.params, x, self.pole_exclusion)
            return r2 ** exponent * u(self.phi(x))
        return v

    def pushforward_solution(self, v: ScalarField) -> ScalarField:
        """Inverse of `pullback_solution`: u(ξ) = (2/|ξ + e_1|)^{N-2m} v(φ(ξ))."""
        exponent = (self.params.N - 2 * self.params.m) / 2

        def u(xi):
            xi, r2 = _pole_offsets(self.params, xi, self.pole_exclusion)
            return (4.0 / r2) ** exponent * v(self.phi(xi))
        return u

    def pullback_source(self, f: ScalarField) -> ScalarField:
        """Ball source of the pulled-back solution: 2^{2m} |x + e_1|^{-2m-N} f(φ(x))."""
        m, N = self.params.m, self.params.N

        def g(x):
            x, r2 = _pole_offsets(self.params, x, self.pole_exclusion)
            return 2.0 ** (2 * m) * r2 ** (-(2 * m + N) / 2) * f(self.phi(x))
        return g


@dataclass(frozen=True)
class SemilinearWeight:
    params: KernelParams
    pole_exclusion: float = field(default_factory=lambda: settings.POLE_EXCLUSION)

    def weight(self, x):
        """2^{2m} |x + e_1|^{-α}."""
        _, r2 = _pole_offsets(self.params, x, self.pole_exclusion)
        return _output(2.0 ** (2 * self.params.m) * r2 ** (-self.params.alpha / 2))

    def transformed_nonlinearity(self, x, t):
        """h(x, t) = 2^{2m} |x + e_1|^{-α} t^q for t >= 0."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise NegativeInput(message="Transformed nonlinearity is defined for t >= 0 only")
        return _output(self.weight(x) * t ** self.params.q)


def green_covariance_residual(params: KernelParams, x, y):
    """
        G_∞^+(φ(x), φ(y)) - (2 / (|x + e_1||y + e_1|))^{2m-N} G_1(x, y).
    """
    cmap = ConformalMap(params)
    ball = BallGeometry.unit(params.N)
    half_space = BallGeometry.half_space(params.N)
    g_ball = np.asarray(green(params, ball, x, y))
    g_half = np.asarray(green(params, half_space, cmap.phi(x), cmap.phi(y)))
    factor = 2.0 / (np.asarray(cmap.conformal_factor(x)) * np.asarray(cmap.conformal_factor(y)))
    return _output(g_half - factor ** (2 * params.m - params.N) * g_ball)


def distance_identity_residual(params: KernelParams, x, y):
    """Relative defect of |φ(x) - φ(y)| = 2|x - y| / (|x + e_1||y + e_1|)."""
    cmap = ConformalMap(params)
    lhs = np.linalg.norm(cmap.phi(x) - cmap.phi(y), axis=-1)
    rhs = 2.0 * np.linalg.norm(as_points(params, x) - as_points(params, y), axis=-1) / (
        np.asarray(cmap.conformal_factor(x)) * np.asarray(cmap.conformal_factor(y)))
    return _output(np.abs(lhs - rhs) / np.abs(rhs))


def psi_invariance_residual(params: KernelParams, x, y):
    """Relative defect of ψ_∞(φ(x), φ(y)) = ψ(x, y)."""
    cmap = ConformalMap(params)
    inner = np.asarray(psi(params, BallGeometry.unit(params.N), x, y))
    outer = np.asarray(psi(params, BallGeometry.half_space(params.N), cmap.phi(x), cmap.phi(y)))
    return _output(np.abs(outer - inner) / np.maximum(np.abs(inner), np.finfo(float).tiny))
