import math
from typing import Optional

import numpy as np
from scipy.stats import norm, qmc

_EDGE = 1e-12


def halton(n: int, dim: int, seed: int) -> np.ndarray:
    """Scrambled Halton points in the unit cube, reproducible for a fixed seed."""
    return qmc.Halton(d=dim, scramble=True, seed=seed).random(n)


def ball_points(n: int, dim: int, seed: int, radius: float = 1.0, center: Optional[np.ndarray] = None,
                shrink: float = 1.0) -> np.ndarray:
    """
        Low-discrepancy points in the open ball of the given radius (rejection from the cube).
        `shrink` < 1 keeps the samples inside the concentric ball of radius shrink*radius.
    """
    engine = qmc.Halton(d=dim, scramble=True, seed=seed)
    accepted = []
    count = 0
    ratio = math.pi ** (dim / 2) / math.gamma(dim / 2 + 1) / 2 ** dim
    while count < n:
        batch = int((n - count) / ratio * 1.25) + 16
        cube = 2.0 * engine.random(batch) - 1.0
        inside = cube[np.sum(cube ** 2, axis=1) < shrink ** 2]
        accepted.append(inside)
        count += len(inside)
    pts = np.concatenate(accepted)[:n] * radius
    if center is not None:
        pts = pts + center
    return pts


def sphere_points(n: int, dim: int, seed: int) -> np.ndarray:
    """Low-discrepancy points on the unit sphere S^{dim-1} (normalized Gaussian transform)."""
    if dim == 1:
        return np.where(halton(n, 1, seed) < 0.5, -1.0, 1.0)
    g = norm.ppf(np.clip(halton(n, dim, seed), _EDGE, 1 - _EDGE))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def pairs_in_ball(n: int, dim: int, seed: int, shrink: float = 1.0):
    """Two independent low-discrepancy point clouds in the unit ball."""
    both = ball_points(2 * n, dim, seed, shrink=shrink)
    rng = np.random.default_rng(seed)
    order = rng.permutation(2 * n)
    return both[order[:n]], both[order[n:]]
