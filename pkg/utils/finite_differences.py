import itertools
from typing import Callable, Sequence, Tuple

import numpy as np
from scipy.special import comb

Evaluator = Callable[[np.ndarray], np.ndarray]


def central_stencil(order: int) -> Tuple[np.ndarray, np.ndarray]:
    """
        Offsets (in units of h) and coefficients of the central difference of the given order.

        The n-th central difference sum_j (-1)^j C(n, j) f(x + (n/2 - j) h) / h^n approximates
        f^(n)(x) with an error expansion in even powers of h, so one Richardson step gains two orders.
    """
    j = np.arange(order + 1)
    offsets = order / 2.0 - j
    coeffs = (-1.0) ** j * comb(order, j)
    return offsets, coeffs


def mixed_partial(f: Evaluator, points: np.ndarray, multiindex: Sequence[int], h) -> np.ndarray:
    """
        Tensor-product central difference for D^k f at each row of `points`.

        :param f: vectorized function, (M, N) -> (M,)
        :param points: evaluation points, shape (M, N)
        :param multiindex: derivative orders per axis
        :param h: step, scalar or shape (M,)
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    h = np.broadcast_to(np.asarray(h, dtype=float), (points.shape[0],))
    axes = [(axis, k) for axis, k in enumerate(multiindex) if k > 0]
    if not axes:
        return f(points)
    stencils = [central_stencil(k) for _, k in axes]
    total = np.zeros(points.shape[0])
    for choice in itertools.product(*[range(len(s[0])) for s in stencils]):
        shift = np.zeros_like(points)
        weight = 1.0
        for (axis, _), (offsets, coeffs), idx in zip(axes, stencils, choice):
            shift[:, axis] += offsets[idx] * h
            weight *= coeffs[idx]
        total += weight * f(points + shift)
    return total / h ** sum(multiindex)


def directional_derivative(f: Evaluator, points: np.ndarray, directions: np.ndarray, order: int, h) -> np.ndarray:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    h = np.broadcast_to(np.asarray(h, dtype=float), (points.shape[0],))
    if order == 0:
        return f(points)
    offsets, coeffs = central_stencil(order)
    total = np.zeros(points.shape[0])
    for offset, coeff in zip(offsets, coeffs):
        total += coeff * f(points + (offset * h)[:, None] * directions)
    return total / h ** order


def richardson(estimate: Callable[[np.ndarray], np.ndarray], h) -> np.ndarray:
    """One Richardson step for an estimate whose error expands in even powers of h."""
    h = np.asarray(h, dtype=float)
    return (4.0 * estimate(h / 2.0) - estimate(h)) / 3.0
