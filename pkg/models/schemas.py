import math
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field, field_validator, model_validator

from settings import get_settings

settings = get_settings()

SCHEMA_VERSION = "1.0"


class KernelParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    N: int = Field(ge=1)
    m: int = Field(ge=1)
    q: float = Field(default=2.0, gt=1)
    k_override: Optional[float] = Field(default=None, gt=0, allow_inf_nan=False)

    @computed_field
    @property
    def alpha(self) -> float:
        return self.N + 2 * self.m - self.q * (self.N - 2 * self.m)

    @computed_field
    @property
    def k_norm(self) -> float:
        if self.k_override is not None:
            return self.k_override
        from kernels import normalization_constant
        return normalization_constant(self.m, self.N)

    @property
    def is_subcritical(self) -> bool:
        if self.N <= 2 * self.m:
            return True
        return self.q < (self.N + 2 * self.m) / (self.N - 2 * self.m)

    def perturbed(self, factor: float) -> "KernelParams":
        """Copy with the normalization constant multiplied by `factor`."""
        return self.model_copy(update={"k_override": self.k_norm * factor})


class BallGeometry(BaseModel):
    """
        Ball `B_R`, shifted ball `B_R^+` centered at `(R, 0, ..., 0)`, or the half-space
        (`radius = inf`, `shifted = True`).
    """
    model_config = ConfigDict(frozen=True)

    dim: int = Field(ge=1)
    radius: float = Field(default=1.0, gt=0)
    shifted: bool = False

    @model_validator(mode="after")
    def check_half_space(self):
        if math.isinf(self.radius) and not self.shifted:
            raise ValueError("An infinite radius is only legal for the shifted geometry (half-space)")
        return self

    @property
    def is_half_space(self) -> bool:
        return math.isinf(self.radius)

    @property
    def center(self) -> Optional[np.ndarray]:
        if self.is_half_space:
            return None
        c = np.zeros(self.dim)
        if self.shifted:
            c[0] = self.radius
        return c

    @classmethod
    def unit(cls, dim: int) -> "BallGeometry":
        return cls(dim=dim)

    @classmethod
    def ball(cls, radius: float, dim: int) -> "BallGeometry":
        return cls(dim=dim, radius=radius)

    @classmethod
    def shifted_ball(cls, radius: float, dim: int) -> "BallGeometry":
        return cls(dim=dim, radius=radius, shifted=True)

    @classmethod
    def half_space(cls, dim: int) -> "BallGeometry":
        return cls(dim=dim, radius=math.inf, shifted=True)


class QuadratureSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    target_rel_error: float = Field(default_factory=lambda: settings.QUAD_TARGET_REL_ERROR, gt=0, le=1e-2)
    max_subdivisions: int = Field(default_factory=lambda: settings.QUAD_MAX_SUBDIVISIONS, ge=1)
    singularity_split_radius: float = Field(default_factory=lambda: settings.QUAD_SPLIT_RADIUS, gt=0, lt=1)
    seed: int = Field(default_factory=lambda: settings.DEFAULT_SEED)
    radial_order: int = Field(default=8, ge=2)
    angular_order: int = Field(default=8, ge=2)
    abs_floor: float = Field(default=1e-14, ge=0)


class CapRange(BaseModel):
    model_config = ConfigDict(frozen=True)

    a: float = Field(ge=0)
    b: float
    R: float = Field(gt=0)

    @model_validator(mode="after")
    def check_order(self):
        if not self.a <= self.b <= 2 * self.R * (1 + 1e-14):
            raise ValueError("Cap range must satisfy 0 <= a <= b <= 2R, got a={}, b={}, R={}".format(
                self.a, self.b, self.R))
        return self


class ReflectionSpec(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    e: Tuple[float, ...]
    lam: float = Field(ge=0, alias="lambda")

    @field_validator("e")
    @classmethod
    def check_direction(cls, value):
        if len(value) < 2:
            raise ValueError("Reflection direction needs dimension >= 2")
        if abs(math.fsum(c * c for c in value) - 1.0) > 1e-12:
            raise ValueError("Reflection direction must be a unit vector")
        if abs(value[0]) > 1e-12:
            raise ValueError("Reflection direction must be orthogonal to e_1")
        return value

    @property
    def direction(self) -> np.ndarray:
        return np.asarray(self.e, dtype=float)


class SampleLabel(str, Enum):
    h_lambda_cap_b = "H_lambda_cap_B"
    j_lambda = "J_lambda"
    w_mu = "W_mu"


class PicardConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    max_iters: int = Field(default=200, ge=1)
    contraction_tol: float = Field(default=1e-12, gt=0)
    divergence_cap: float = Field(default=1e6, gt=1)
    damping: float = Field(default=1.0, gt=0, le=1)


class RescaleSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    M: float = Field(gt=0, allow_inf_nan=False)
    x0: Tuple[float, ...]
    params: KernelParams

    @model_validator(mode="after")
    def check_center(self):
        if len(self.x0) != self.params.N:
            raise ValueError("Blow-up center has dimension {}, expected {}".format(len(self.x0), self.params.N))
        return self

    @property
    def scale(self) -> float:
        return self.M ** ((1 - self.params.q) / (2 * self.params.m))

    @property
    def center(self) -> np.ndarray:
        return np.asarray(self.x0, dtype=float)


class Command(str, Enum):
    kernel_eval = "kernel-eval"
    verify = "verify"
    solve_ball = "solve-ball"
    halfspace_repr = "halfspace-repr"
    ode_run = "ode-run"
    ode_scan = "ode-scan"
    rescale_check = "rescale-check"


class RunConfig(BaseModel):
    command: Command
    params: KernelParams
    quadrature: QuadratureSpec = Field(default_factory=QuadratureSpec)
    output: Optional[str] = None
    seed: int = Field(default_factory=lambda: settings.DEFAULT_SEED)

    @property
    def output_dir(self) -> str:
        return self.output or settings.OUTPUT_DIR


# Reports

class CaseStatus(str, Enum):
    passed = "passed"
    failed = "failed"


class CaseResult(BaseModel):
    name: str
    status: CaseStatus
    margin: Optional[float] = None
    details: Dict[str, Any] = {}

    @classmethod
    def check(cls, name: str, ok: bool, margin: Optional[float] = None, **details) -> "CaseResult":
        return cls(name=name, status=CaseStatus.passed if ok else CaseStatus.failed, margin=margin, details=details)


class ReportSummary(BaseModel):
    passed: int
    failed: int


class ReportMetadata(BaseModel):
    timestamp: str
    seed: int
    argv: List[str] = []


class VerificationReport(BaseModel):
    schema_version: str = SCHEMA_VERSION
    suite: str
    params: Dict[str, Any]
    cases: List[CaseResult]
    metadata: Optional[ReportMetadata] = None

    @computed_field
    @property
    def summary(self) -> ReportSummary:
        failed = sum(1 for case in self.cases if case.status == CaseStatus.failed)
        return ReportSummary(passed=len(self.cases) - failed, failed=failed)

    @property
    def ok(self) -> bool:
        return self.summary.failed == 0


class InequalityReport(BaseModel):
    inequality_id: str
    samples: int
    min_margin: Optional[float]
    violations: int


class ReflectionReport(BaseModel):
    schema_version: str = SCHEMA_VERSION
    metadata: Optional[ReportMetadata] = None
    params: KernelParams
    lam: float
    e: Tuple[float, ...]
    inequalities: List[InequalityReport]

    @property
    def violations(self) -> int:
        return sum(item.violations for item in self.inequalities)


class PointwiseBoundReport(BaseModel):
    schema_version: str = SCHEMA_VERSION
    metadata: Optional[ReportMetadata] = None
    params: KernelParams
    samples: int
    max_ratio: float
    sampled_max_ratio: Optional[float] = None
    median_ratio: float


class HalfSpaceReport(BaseModel):
    schema_version: str = SCHEMA_VERSION
    metadata: Optional[ReportMetadata] = None
    params: KernelParams
    x: Tuple[float, ...]
    radii: List[float]
    values: List[float]
    errors: List[float]
    cauchy_gaps: List[float]
    boundary_discrepancy: List[float]
    split_bounds: List[float]
    discrepancy_exponent: Optional[float] = None

    @computed_field
    @property
    def value(self) -> float:
        return self.values[-1]


class PicardVerdict(str, Enum):
    converged = "Converged"
    diverged = "Diverged"
    inconclusive = "Inconclusive"


class PicardReport(BaseModel):
    schema_version: str = SCHEMA_VERSION
    metadata: Optional[ReportMetadata] = None
    params: KernelParams
    verdict: PicardVerdict
    iterations: int
    residual: Optional[float]
    sup_norm: float
    nodes: int


class ScanVerdictKind(str, Enum):
    stays_bounded = "StaysBounded"
    blows_up = "BlowsUp"
    undetermined = "Undetermined"


class ScanVerdict(BaseModel):
    initial: Tuple[float, ...]
    verdict: ScanVerdictKind
    time: Optional[float] = None
    h_drift: Optional[float] = None


class ScanReport(BaseModel):
    schema_version: str = SCHEMA_VERSION
    metadata: Optional[ReportMetadata] = None
    m: int
    extension: str
    t_end: float
    bound_cap: float
    verdicts: List[ScanVerdict]


class VanishingReport(BaseModel):
    schema_version: str = SCHEMA_VERSION
    metadata: Optional[ReportMetadata] = None
    order: Tuple[int, ...]
    M_values: List[float]
    sup_norms: List[float]
    expected_exponent: float
    fitted_slope: float

    @computed_field
    @property
    def within_tolerance(self) -> bool:
        if self.expected_exponent == 0:
            return abs(self.fitted_slope) <= 0.05
        return abs(self.fitted_slope - self.expected_exponent) <= 0.05 * abs(self.expected_exponent)


# HTTP payloads

class KernelValue(BaseModel):
    value: float
    psi: Optional[float] = None


class PointValue(BaseModel):
    value: List[float]


class SuiteRequest(BaseModel):
    params: KernelParams
    quadrature: Optional[QuadratureSpec] = None
    samples: Optional[int] = Field(default=None, ge=1)
    seed: Optional[int] = None
