import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy.integrate import DOP853, OdeSolution

from models.errors import BlowUp, StepFailure
from models.schemas import ScanReport, ScanVerdict, ScanVerdictKind
from settings import get_settings
from utils.reports import write_csv
from utils.sampling import halton

logger = logging.getLogger(__name__)

settings = get_settings()

_MIN_STEP = 1e-13


@dataclass
class Nonlinearity1D:
    f: Callable[[float], float]
    F: Callable[[float], float]
    name: str
    extension: str = "abs"

    def validate(self, n_samples: int = 100, span: float = 2.0, tolerance: float = 1e-6, seed: int = 0):
        """Checks f(0) = F(0) = 0, f > 0 on s > 0 and F' = f by central differences."""
        if self.f(0.0) != 0.0 or self.F(0.0) != 0.0:
            raise ValueError("Nonlinearity {} must vanish at 0 with its antiderivative".format(self.name))
        s = span * (2 * halton(n_samples, 1, seed)[:, 0] - 1)
        positive = s[s > 0]
        if np.any(np.asarray([self.f(v) for v in positive]) <= 0):
            raise ValueError("Nonlinearity {} must be positive for s > 0".format(self.name))
        h = 1e-4
        derivative = np.asarray([(self.F(v + h) - self.F(v - h)) / (2 * h) for v in s])
        values = np.asarray([self.f(v) for v in s])
        if np.max(np.abs(derivative - values) / (1 + np.abs(values))) > tolerance:
            raise ValueError("F' differs from f for {}".format(self.name))
        return self


def power_nonlinearity(q: float, extension: str = "abs") -> Nonlinearity1D:
    """
        f(s) = s^q on s >= 0, extended by |s|^q (`abs`) or by 0 (`zero`) to s < 0.
    """
    if extension == "abs":
        return Nonlinearity1D(f=lambda s: abs(s) ** q, F=lambda s: s * abs(s) ** q / (q + 1),
                              name="|s|^{}".format(q), extension=extension)
    if extension == "zero":
        return Nonlinearity1D(f=lambda s: max(s, 0.0) ** q, F=lambda s: max(s, 0.0) ** (q + 1) / (q + 1),
                              name="s_+^{}".format(q), extension=extension)
    raise ValueError("Unknown extension '{}', expected 'abs' or 'zero'".format(extension))


def linear_nonlinearity() -> Nonlinearity1D:
    return Nonlinearity1D(f=lambda s: s, F=lambda s: 0.5 * s * s, name="s", extension="linear")


@dataclass
class ODEState:
    t: float
    derivs: np.ndarray
    H: float

    @classmethod
    def create(cls, t: float, derivs: Sequence[float], nl: Nonlinearity1D, m: int) -> "ODEState":
        derivs = np.asarray(derivs, dtype=float)
        return cls(t=float(t), derivs=derivs, H=first_integral(derivs, nl, m))


def first_integral(state, nl: Nonlinearity1D, m: int) -> float:
    """
        H = Σ_{i=1}^{m-1} (-1)^i u^(i) u^(2m-i) + (-1)^m (½ (u^(m))^2 + F(u)).
        `state` is an ODEState or the derivative vector (u, u', ..., u^(2m-1)).
    """
    derivs = state.derivs if isinstance(state, ODEState) else state
    if len(derivs) != 2 * m:
        raise ValueError("State needs 2m = {} derivatives, got {}".format(2 * m, len(derivs)))
    total = sum((-1) ** i * derivs[i] * derivs[2 * m - i] for i in range(1, m))
    return float(total + (-1) ** m * (0.5 * derivs[m] ** 2 + nl.F(derivs[0])))


def _first_integral_scale(derivs, nl: Nonlinearity1D, m: int) -> float:
    """Size of the terms summed in H; the drift guard is relative to it."""
    total = sum(abs(derivs[i] * derivs[2 * m - i]) for i in range(1, m))
    return float(total + 0.5 * derivs[m] ** 2 + abs(nl.F(derivs[0])))


def vector_field(nl: Nonlinearity1D, m: int) -> Callable[[float, np.ndarray], np.ndarray]:
    """Y' = (Y_1, ..., Y_{2m-1}, (-1)^m f(Y_0)) for (-1)^m u^(2m) = f(u)."""
    sign = (-1) ** m

    def rhs(t, y):
        out = np.empty_like(y)
        out[:-1] = y[1:]
        out[-1] = sign * nl.f(y[0])
        return out
    return rhs


@dataclass
class Trajectory:
    m: int
    extension: str
    t: np.ndarray
    derivs: np.ndarray
    H: np.ndarray
    interpolants: List = field(default_factory=list, repr=False)

    @property
    def h_drift(self) -> float:
        return float(np.max(np.abs(self.H - self.H[0])))

    @property
    def final(self) -> ODEState:
        return ODEState(t=float(self.t[-1]), derivs=self.derivs[-1].copy(), H=float(self.H[-1]))

    def dense(self) -> OdeSolution:
        """Continuous interpolant of all 2m components over the integrated interval."""
        if not self.interpolants:
            constant = self.derivs[0]
            return lambda t: np.multiply.outer(constant, np.ones_like(np.asarray(t, dtype=float)))
        return OdeSolution(self.t, self.interpolants)

    def rows(self):
        for t, derivs, H in zip(self.t, self.derivs, self.H):
            yield (t, *derivs, H)

    def header(self) -> List[str]:
        return ["t", "u"] + ["u{}".format(i) for i in range(1, 2 * self.m)] + ["H"]


def write_trajectory(trajectory: Trajectory, path: str) -> str:
    return write_csv(path, trajectory.header(), trajectory.rows())


def integrate(initial: ODEState, nl: Nonlinearity1D, m: int, t_end: float, tol: float = 1e-12,
              bound_cap: Optional[float] = None, require_dirichlet: bool = True,
              drift_tol: float = 1e-10) -> Trajectory:
    """
        Integrates (-1)^m u^(2m) = f(u) from `initial` to `t_end` with DOP853.

        A step whose first-integral change exceeds drift_tol (1 + S), S the size of the terms of H, is
        rejected and the solver restarted from the last accepted state with half that step as maximal
        step.

        :raises BlowUp: when |u| exceeds `bound_cap`; carries the escape time
        :raises StepFailure: when the solver fails or the step size underflows
    """
    if tol <= 0:
        raise ValueError("Integrator tolerance must be positive, got {}".format(tol))
    derivs = np.asarray(initial.derivs, dtype=float)
    if len(derivs) != 2 * m:
        raise ValueError("Initial state needs 2m = {} derivatives, got {}".format(2 * m, len(derivs)))
    if require_dirichlet and np.any(derivs[:m] != 0):
        raise ValueError("Dirichlet data requires u(0) = ... = u^(m-1)(0) = 0")
    bound_cap = settings.BLOWUP_CAP if bound_cap is None else bound_cap
    rhs = vector_field(nl, m)
    rtol = max(tol, 100 * np.finfo(float).eps)

    ts, ys, hs, interpolants = [initial.t], [derivs.copy()], [first_integral(derivs, nl, m)], []
    max_step = np.inf
    solver = DOP853(rhs, initial.t, derivs, t_end, rtol=rtol, atol=tol, max_step=max_step)
    rejections = 0
    while solver.status == "running":
        t_prev, y_prev, h_prev = ts[-1], ys[-1], hs[-1]
        solver.step()
        if solver.status == "failed":
            raise StepFailure(message="Integrator failed at t={:.6g}".format(solver.t))
        H = first_integral(solver.y, nl, m)
        if abs(H - h_prev) > drift_tol * (1 + _first_integral_scale(y_prev, nl, m)):
            max_step = abs(solver.t - t_prev) / 2
            if max_step < _MIN_STEP * (1 + abs(t_prev)):
                raise StepFailure(message="Step size underflow at t={:.6g}".format(t_prev))
            rejections += 1
            logger.debug("First-integral drift %.3e at t=%.6g; restarting with max_step %.3e",
                         abs(H - h_prev), solver.t, max_step)
            solver = DOP853(rhs, t_prev, y_prev, t_end, rtol=rtol, atol=tol, max_step=max_step)
            continue
        interpolants.append(solver.dense_output())
        ts.append(solver.t)
        ys.append(solver.y.copy())
        hs.append(H)
        if not np.all(np.isfinite(solver.y)) or abs(solver.y[0]) > bound_cap:
            logger.info("Blow-up: |u| > %.1e at t=%.6g", bound_cap, solver.t)
            raise BlowUp(message="|u| exceeded {:.1e}".format(bound_cap), escape_time=float(solver.t))
    if rejections:
        logger.debug("Integration to t=%g needed %d drift restarts", t_end, rejections)
    return Trajectory(m=m, extension=nl.extension, t=np.asarray(ts), derivs=np.asarray(ys), H=np.asarray(hs),
                      interpolants=interpolants)


def bounded_solution_scan(nl: Nonlinearity1D, m: int, grid: Sequence[Sequence[float]], t_end: float,
                          bound_cap: float, tol: float = 1e-10) -> ScanReport:
    """
        Integrates from Dirichlet data with free derivatives u^(m)(0), ..., u^(2m-1)(0) taken from
        `grid` and records a horizon-relative verdict per grid point.
    """
    verdicts = []
    for point in grid:
        point = tuple(float(v) for v in point)
        if len(point) != m:
            raise ValueError("Grid points need m = {} free derivatives, got {}".format(m, len(point)))
        initial = ODEState.create(0.0, np.concatenate([np.zeros(m), point]), nl, m)
        try:
            trajectory = integrate(initial, nl, m, t_end, tol=tol, bound_cap=bound_cap)
        except BlowUp as exc:
            verdicts.append(ScanVerdict(initial=point, verdict=ScanVerdictKind.blows_up, time=exc.escape_time))
        except StepFailure as exc:
            logger.warning("Scan point %s undetermined: %s", point, exc.message)
            verdicts.append(ScanVerdict(initial=point, verdict=ScanVerdictKind.undetermined))
        else:
            verdicts.append(ScanVerdict(initial=point, verdict=ScanVerdictKind.stays_bounded, time=t_end,
                                        h_drift=trajectory.h_drift))
    return ScanReport(m=m, extension=nl.extension, t_end=t_end, bound_cap=bound_cap, verdicts=verdicts)
