from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from models.schemas import KernelParams, SampleLabel

# Fields are vectorized callables: an array of points of shape (M, N) maps to an array of shape (M,).
ScalarField = Callable[[np.ndarray], np.ndarray]
VectorField = Callable[[np.ndarray], np.ndarray]


@dataclass
class ManufacturedSolution:
    """
        A field `v` on a ball together with the data the Green-Poisson formula needs.

        `laplacian_powers[i]` is `Δ^i v` for `i = 0..m` and `laplacian_gradients[i]` is the
        gradient of `Δ^i v` (shape (M, N)). `source` is `(-Δ)^m v`.
    """
    params: KernelParams
    v: ScalarField
    laplacian_powers: List[ScalarField]
    source: ScalarField
    descriptor: str
    laplacian_gradients: List[VectorField] = field(default_factory=list)
    dirichlet: bool = False


@dataclass
class HalfSpaceField:
    """
        A bounded field `u` on the half-space with the boundary data of its Laplacian powers.
        Same conventions as `ManufacturedSolution`.
    """
    params: KernelParams
    u: ScalarField
    laplacian_powers: List[ScalarField]
    laplacian_gradients: List[VectorField]
    source: ScalarField
    descriptor: str

    def boundary_weight(self, y: np.ndarray, normals: Optional[np.ndarray] = None) -> np.ndarray:
        """
            Sum of `|Δ^j u|` and `|∂_ν Δ^j u|` over the orders entering the boundary terms
            (derivative order at most m-1). Without `normals` the full gradient norm is used.
        """
        m = self.params.m
        total = np.zeros(len(y))
        for j in range((m - 1) // 2 + 1):
            total += np.abs(self.laplacian_powers[j](y))
        for j in range(m // 2):
            grad = self.laplacian_gradients[j](y)
            if normals is None:
                total += np.linalg.norm(grad, axis=-1)
            else:
                total += np.abs(np.sum(grad * normals, axis=-1))
        return total


@dataclass
class GridFunction:
    """
        Samples of a field on a ball lattice.

        `orbits` groups nodes into rotation orbits about the x_1-axis; nodes sharing an orbit id
        have equal `axial` (x_1) and `radial` (|x'|) coordinates.
    """
    params: KernelParams
    points: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    boundary: np.ndarray
    orbits: Optional[np.ndarray] = None
    axial: Optional[np.ndarray] = None
    radial: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.axial is None:
            self.axial = self.points[:, 0].copy()
        if self.radial is None:
            self.radial = np.linalg.norm(self.points[:, 1:], axis=1)

    def with_values(self, values: np.ndarray) -> "GridFunction":
        return GridFunction(
            params=self.params, points=self.points, weights=self.weights, values=np.asarray(values, dtype=float),
            boundary=self.boundary, orbits=self.orbits, axial=self.axial, radial=self.radial,
        )

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    @property
    def volume(self) -> float:
        return float(np.sum(self.weights))


@dataclass
class SampleSet:
    points: np.ndarray
    label: SampleLabel


@dataclass(frozen=True)
class CoefficientMap:
    order: Tuple[int, ...]
    values: ScalarField

    @property
    def degree(self) -> int:
        return sum(self.order)
