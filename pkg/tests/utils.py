import math

import numpy as np

from models.schemas import KernelParams
from semilinear import build_ball_lattice

NEWTON_3D = 1 / (4 * math.pi)


def cap_integral_3d(x1: float, a: float, b: float, R: float) -> float:
    """
    Closed form of the unweighted cap integral of `|x - y|^{-3}` over `{y ∈ ∂B_R^+ : a <= y_1 <= b}`.

    Parameters
    ----------
    `x1` : `float`
        First coordinate of `x = (x1, 0, 0)`.

    `a`, `b` : `float`
        Cap range, `0 <= a <= b <= 2R`.

    `R` : `float`
        Radius of the shifted ball.

    Returns
    -------
    `float`
        `2πR/(R - x1) [(x1² + 2a(R - x1))^{-1/2} - (x1² + 2b(R - x1))^{-1/2}]`.
    """
    c = R - x1
    return 2 * math.pi * R / c * ((x1 ** 2 + 2 * a * c) ** -0.5 - (x1 ** 2 + 2 * b * c) ** -0.5)


def small_lattice(params: KernelParams, values=None):
    """A coarse lattice with optional constant values, cheap enough for operator assembly in tests."""
    lattice = build_ball_lattice(params, n_radial=5, angular_order=4)
    if values is None:
        return lattice
    return lattice.with_values(np.full(len(lattice.points), float(values)))
