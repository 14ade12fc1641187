import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from conformal import SemilinearWeight
from kernels import green_unchecked
from models.domain import GridFunction
from models.errors import NegativeInput, PoleProximity
from models.schemas import BallGeometry, KernelParams, PicardConfig, PicardReport, PicardVerdict, QuadratureSpec
from quadrature import sphere_rule, unit_sphere_area
from settings import get_settings
from utils.reports import write_csv

logger = logging.getLogger(__name__)

settings = get_settings()

HISTORY_HEADER = ["iter", "sup_norm", "increment", "residual"]

_CHUNK_ENTRIES = 2_000_000


def _sphere_orbits(N: int, polar_order: int, inner_order: int) -> np.ndarray:
    """Orbit index of every sphere-rule node under rotations about the x_1-axis."""
    if N == 2:
        count = 2 * polar_order
        k = np.arange(count)
        return np.minimum(k, count - 1 - k)
    inner_count = len(sphere_rule(N - 1, inner_order, inner_order)[0])
    return np.repeat(np.arange(polar_order), inner_count)


def build_ball_lattice(params: KernelParams, n_radial: int = 12, angular_order: int = 8,
                       inner_order: Optional[int] = None, pole_exclusion: Optional[float] = None) -> GridFunction:
    """
        Product lattice on the unit ball: Gauss-Jacobi radii for the weight r^{N-1} times a sphere rule
        with polar axis e_1, plus weightless boundary nodes on |x| = 1. Orbits within `pole_exclusion`
        of -e_1 are removed and the remaining weights rescaled to the ball volume.
    """
    N = params.N
    if N < 2:
        raise ValueError("Ball lattices need N >= 2")
    pole_exclusion = settings.LATTICE_POLE_EXCLUSION if pole_exclusion is None else pole_exclusion
    if inner_order is None:
        inner_order = angular_order if N <= 3 else min(angular_order, 3)
    nodes, sphere_weights = sphere_rule(N, angular_order, inner_order)
    sphere_orbits = _sphere_orbits(N, angular_order, inner_order)
    t, w = roots_jacobi(n_radial, 0.0, N - 1.0)
    radii = np.append((1 + t) / 2, 1.0)
    radial_weights = np.append(w / 2 ** N, 0.0)

    points = np.concatenate([r * nodes for r in radii])
    weights = np.concatenate([wr * sphere_weights for wr in radial_weights])
    orbits = np.concatenate([k * (sphere_orbits.max() + 1) + sphere_orbits for k in range(len(radii))])
    boundary = np.repeat(np.arange(len(radii)) == n_radial, len(nodes))

    volume = unit_sphere_area(N) / N
    shifted = points.copy()
    shifted[:, 0] += 1.0
    keep = np.linalg.norm(shifted, axis=1) >= pole_exclusion
    if not np.all(keep):
        logger.info("Lattice: %d nodes within %.1e of the pole removed", int(np.count_nonzero(~keep)), pole_exclusion)
    points, weights, orbits, boundary = points[keep], weights[keep], orbits[keep], boundary[keep]
    weights = weights * volume / weights.sum()
    return GridFunction(params=params, points=points, weights=weights, values=np.zeros(len(points)),
                        boundary=boundary, orbits=orbits)


def _tangent(x: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(x)
    u = np.zeros_like(x)
    u[-1] = 1.0
    if norm > 0:
        xhat = x / norm
        u = u - (u @ xhat) * xhat
        if np.linalg.norm(u) < 1e-8:
            u = np.zeros_like(x)
            u[1] = 1.0
            u = u - (u @ xhat) * xhat
    return u / np.linalg.norm(u)


@dataclass
class GreenOperator:
    """
        Discretization of v ↦ ∫_B G_1(x, y) h(y, v(y)) dy on a lattice: K_ij = w_j G_1(x_i, x_j) off the
        diagonal and the integral of G_1(x_i, ·) over the ball of volume w_i about x_i on it.
    """
    lattice: GridFunction
    spec: QuadratureSpec = field(default_factory=QuadratureSpec)
    matrix: np.ndarray = field(init=False, repr=False)
    weight: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        params = self.lattice.params
        self._check_pole()
        self.weight = np.asarray(SemilinearWeight(params).weight(self.lattice.points))
        self.matrix = self._assemble()

    def _check_pole(self):
        points = self.lattice.points
        shifted = points.copy()
        shifted[:, 0] += 1.0
        close = (np.linalg.norm(shifted, axis=1) < settings.LATTICE_POLE_EXCLUSION) & (self.lattice.weights > 0)
        if np.any(close):
            raise PoleProximity(message="{} weighted nodes lie within {:.0e} of the pole -e_1".format(
                int(np.count_nonzero(close)), settings.LATTICE_POLE_EXCLUSION))

    def _assemble(self) -> np.ndarray:
        params = self.lattice.params
        geom = BallGeometry.unit(params.N)
        P, w = self.lattice.points, self.lattice.weights
        n = len(P)
        K = np.empty((n, n))
        rows = max(1, _CHUNK_ENTRIES // (n * params.N))
        for start in range(0, n, rows):
            stop = min(n, start + rows)
            idx = np.arange(start, stop)
            Y = np.broadcast_to(P[None, :, :], (stop - start, n, params.N)).copy()
            Y[idx - start, idx] = 0.5 * P[idx]
            block = green_unchecked(params, geom, P[idx, None, :], Y)
            block[idx - start, idx] = 0.0
            K[start:stop] = np.maximum(block, 0.0) * w[None, :]
        K[np.arange(n), np.arange(n)] = self._cell_masses()
        logger.debug("Green operator assembled on %d nodes", n)
        return K

    def _cell_masses(self) -> np.ndarray:
        """∫_{B_ρ(x_i)} G_1(x_i, y) dy with |B_ρ| = w_i, by a radial rule along a tangent direction."""
        params = self.lattice.params
        geom = BallGeometry.unit(params.N)
        unit_ball = unit_sphere_area(params.N) / params.N
        s_nodes, s_weights = roots_legendre(self.spec.radial_order)
        masses = np.zeros(len(self.lattice.points))
        for i, (x, w) in enumerate(zip(self.lattice.points, self.lattice.weights)):
            if w <= 0:
                continue
            rho = (w / unit_ball) ** (1.0 / params.N)
            s = 0.5 * rho * (s_nodes + 1)
            Y = x + s[:, None] * _tangent(x)
            values = np.maximum(green_unchecked(params, geom, x, Y), 0.0)
            masses[i] = unit_sphere_area(params.N) * 0.5 * rho * float(s_weights @ (values * s ** (params.N - 1)))
        return masses

    def __call__(self, values: np.ndarray) -> np.ndarray:
        return self.matrix @ (self.weight * values ** self.lattice.params.q)

    @property
    def kernel_mass(self) -> np.ndarray:
        """T[1] at every node."""
        return self.matrix @ self.weight


def apply_green_operator(v: GridFunction, spec: QuadratureSpec,
                         operator: Optional[GreenOperator] = None) -> GridFunction:
    """
        T[v](x) = Σ_y w(y) G_1(x, y) h(y, v(y)) with h(y, t) = 2^{2m} |y + e_1|^{-α} t^q.

        :raises NegativeInput: when v takes a negative value
        :raises PoleProximity: when a weighted node lies within the lattice pole exclusion of -e_1
    """
    if np.any(v.values < 0):
        raise NegativeInput(message="Green operator is defined for nonnegative fields only")
    operator = operator or GreenOperator(v, spec)
    return v.with_values(np.maximum(operator(v.values), 0.0))


@dataclass
class PicardResult:
    report: PicardReport
    solution: GridFunction

    @property
    def verdict(self) -> PicardVerdict:
        return self.report.verdict


def picard_solve(v0: GridFunction, cfg: PicardConfig, spec: QuadratureSpec,
                 operator: Optional[GreenOperator] = None) -> Tuple[PicardResult, List[Tuple[int, float, float, float]]]:
    """
        Damped Picard iteration v <- (1 - d) v + d T[v].

        Stops with Converged once the sup-norm increment drops below `contraction_tol` and one more
        application of T confirms the residual, with Diverged past `divergence_cap`, and with
        Inconclusive after `max_iters`. History rows are (iter, sup_norm, increment, residual).
    """
    if np.any(v0.values < 0):
        raise NegativeInput(message="Initial iterate must be nonnegative")
    operator = operator or GreenOperator(v0, spec)
    params = v0.params
    values = np.asarray(v0.values, dtype=float)
    history = []
    verdict = PicardVerdict.inconclusive
    residual = None
    iteration = 0
    for iteration in range(1, cfg.max_iters + 1):
        image = np.maximum(operator(values), 0.0)
        residual = float(np.max(np.abs(image - values)))
        updated = (1 - cfg.damping) * values + cfg.damping * image
        increment = float(np.max(np.abs(updated - values)))
        sup_norm = float(np.max(np.abs(updated)))
        history.append((iteration, sup_norm, increment, residual))
        logger.debug("Picard iteration %d: sup %.6e, increment %.3e", iteration, sup_norm, increment)
        values = updated
        if not math.isfinite(sup_norm) or sup_norm > cfg.divergence_cap:
            verdict = PicardVerdict.diverged
            logger.warning("Picard iteration diverged at step %d (sup %.3e)", iteration, sup_norm)
            break
        if increment < cfg.contraction_tol:
            residual = float(np.max(np.abs(np.maximum(operator(values), 0.0) - values)))
            if residual < cfg.contraction_tol:
                verdict = PicardVerdict.converged
                break
    if verdict == PicardVerdict.inconclusive:
        logger.warning("Picard iteration inconclusive after %d steps", iteration)
    report = PicardReport(
        params=params, verdict=verdict, iterations=iteration, residual=residual,
        sup_norm=float(np.max(np.abs(values))) if np.all(np.isfinite(values)) else math.inf, nodes=len(values),
    )
    logger.info("Picard solve: %s after %d iterations", verdict.value, iteration)
    return PicardResult(report=report, solution=v0.with_values(values)), history


def write_history(history, path: str) -> str:
    return write_csv(path, HISTORY_HEADER, history)


def limit_nonlinearity(hbar: float, kbar: float, s, q: float):
    """hbar s^q for s >= 0 and kbar |s|^q for s < 0."""
    if hbar <= 0 or kbar <= 0:
        raise ValueError("Limit coefficients must be positive, got hbar={}, kbar={}".format(hbar, kbar))
    s = np.asarray(s, dtype=float)
    value = np.where(s >= 0, hbar, kbar) * np.abs(s) ** q
    return float(value) if value.ndim == 0 else value
