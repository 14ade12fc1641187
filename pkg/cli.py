import logging
import os
import sys
from functools import wraps
from typing import List, Optional, Sequence

import click
import numpy as np
from pydantic import ValidationError

from kernels import green, psi
from models.domain import CoefficientMap
from models.errors import BlowUp, PolyharmonicError
from models.schemas import BallGeometry, Command, KernelParams, PicardConfig, PicardVerdict, QuadratureSpec, RunConfig
from ode1d import ODEState, bounded_solution_scan, integrate, power_nonlinearity, write_trajectory
from representation import halfspace_representation, pushed_bump_field
from rescale import lower_order_vanishing
from semilinear import GreenOperator, build_ball_lattice, picard_solve, write_history
from settings import get_settings
from utils.api_utils import parse_comma_separated_floats, parse_point
from utils.reports import make_metadata, write_json
from verification import SUITES, run_suite

logger = logging.getLogger(__name__)

settings = get_settings()

DOMAINS = ("ball", "shifted-ball", "half-space")


def _run_config(command: Command, N: int, m: int, q: float, output: Optional[str] = None,
                seed: Optional[int] = None, **quadrature) -> RunConfig:
    try:
        return RunConfig(
            command=command, params=KernelParams(N=N, m=m, q=q), output=output,
            quadrature=QuadratureSpec(**{k: v for k, v in quadrature.items() if v is not None}),
            seed=settings.DEFAULT_SEED if seed is None else seed,
        )
    except ValidationError as exc:
        raise click.UsageError(str(exc))


def _point(value: str, N: int, name: str) -> np.ndarray:
    try:
        return np.asarray(parse_point(value, N))
    except ValueError as exc:
        raise click.BadParameter(str(exc), param_hint="--{}".format(name))


def _geometry(domain: str, radius: float, N: int) -> BallGeometry:
    try:
        if domain == "ball":
            return BallGeometry.ball(radius, N)
        if domain == "shifted-ball":
            return BallGeometry.shifted_ball(radius, N)
        return BallGeometry.half_space(N)
    except ValidationError as exc:
        raise click.BadParameter(str(exc), param_hint="--R")


def _argv() -> List[str]:
    return click.get_current_context().find_root().meta.get("argv", [])


def _output_path(config: RunConfig, name: str) -> str:
    return os.path.join(config.output_dir, name)


PARAMS_OPTIONS = (
    click.option("--m", "m", type=int, required=True, help="Polyharmonic order m >= 1."),
    click.option("--N", "N", type=int, required=True, help="Spatial dimension N >= 1."),
    click.option("--q", "q", type=float, default=2.0, show_default=True, help="Exponent q > 1."),
)

OUTPUT_OPTIONS = (
    click.option("--output", type=click.Path(file_okay=False), default=None,
                 help="Report directory (default: OUTPUT_DIR)."),
    click.option("--seed", type=int, default=None, help="Sampling seed (default: DEFAULT_SEED)."),
)


def params_options(func):
    for option in reversed(PARAMS_OPTIONS):
        func = option(func)
    return func


def output_options(func):
    for option in reversed(OUTPUT_OPTIONS):
        func = option(func)
    return func


def domain_errors(func):
    """Numerical errors end the command with exit code 1 and their message on standard error."""
    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except PolyharmonicError as exc:
            raise click.ClickException("{}: {}".format(type(exc).__name__, exc.message))
    return wrapper


@click.group()
@click.option("--log-level", default=None, help="Logging level (default: LOG_LEVEL).")
def cli(log_level: Optional[str]):
    """Polyharmonic Green functions, representation formulas and Liouville probes."""
    logging.basicConfig(level=(log_level or settings.LOG_LEVEL).upper(),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s", stream=sys.stderr)


@cli.command("kernel-eval")
@params_options
@click.option("--domain", type=click.Choice(DOMAINS), default="ball", show_default=True)
@click.option("--R", "radius", type=float, default=1.0, show_default=True, help="Radius of (shifted) balls.")
@click.option("--x", "x", required=True, help="Point x, comma-separated.")
@click.option("--y", "y", required=True, help="Point y, comma-separated.")
@click.option("--show-psi", is_flag=True, help="Also print the ψ-argument.")
@domain_errors
def kernel_eval(m, N, q, domain, radius, x, y, show_psi):
    """Evaluate the Green function G(x, y)."""
    config = _run_config(Command.kernel_eval, N, m, q)
    geom = _geometry(domain, radius, N)
    xp, yp = _point(x, N, "x"), _point(y, N, "y")
    click.echo("{:.16g}".format(green(config.params, geom, xp, yp)))
    if show_psi:
        click.echo("psi={:.16g}".format(psi(config.params, geom, xp, yp)))
    return 0


@cli.command("verify")
@click.option("--suite", type=click.Choice(sorted(SUITES)), required=True)
@params_options
@output_options
@click.option("--samples", type=int, default=None, help="Override the suite's sample count.")
@click.option("--target-rel-error", type=float, default=None)
@domain_errors
def verify(suite, m, N, q, output, seed, samples, target_rel_error):
    """Run a verification suite and write its JSON report."""
    config = _run_config(Command.verify, N, m, q, output, seed, target_rel_error=target_rel_error)
    report = run_suite(suite, config.params, config.quadrature, config.seed, samples)
    report.metadata = make_metadata(config.seed, _argv())
    write_json(report, _output_path(config, "verify-{}.json".format(suite)))
    click.echo("{}: {} passed, {} failed".format(suite, report.summary.passed, report.summary.failed))
    return 0 if report.ok else 1


@cli.command("solve-ball")
@params_options
@output_options
@click.option("--delta", type=float, default=1e-2, show_default=True, help="Constant initial iterate.")
@click.option("--n-radial", type=int, default=12, show_default=True)
@click.option("--angular-order", type=int, default=8, show_default=True)
@click.option("--max-iters", type=int, default=200, show_default=True)
@click.option("--damping", type=float, default=1.0, show_default=True)
@click.option("--divergence-cap", type=float, default=1e6, show_default=True)
@domain_errors
def solve_ball(m, N, q, output, seed, delta, n_radial, angular_order, max_iters, damping, divergence_cap):
    """Picard iteration for the transformed integral equation on the unit ball."""
    config = _run_config(Command.solve_ball, N, m, q, output, seed)
    try:
        picard = PicardConfig(max_iters=max_iters, damping=damping, divergence_cap=divergence_cap)
    except ValidationError as exc:
        raise click.UsageError(str(exc))
    if delta < 0:
        raise click.BadParameter("must be nonnegative", param_hint="--delta")
    lattice = build_ball_lattice(config.params, n_radial=n_radial, angular_order=angular_order)
    operator = GreenOperator(lattice, config.quadrature)
    result, history = picard_solve(lattice.with_values(np.full(len(lattice.points), delta)), picard,
                                   config.quadrature, operator)
    result.report.metadata = make_metadata(config.seed, _argv())
    write_json(result.report, _output_path(config, "solve-ball.json"))
    write_history(history, _output_path(config, "solve-ball-history.csv"))
    click.echo("{} after {} iterations (sup {:.6e})".format(
        result.verdict.value, result.report.iterations, result.report.sup_norm))
    return 0 if result.verdict == PicardVerdict.converged else 1


@cli.command("halfspace-repr")
@params_options
@output_options
@click.option("--x", "x", required=True, help="Point of the half-space, comma-separated.")
@click.option("--radii", default=None, help="Comma-separated truncation radii (default 4x_1 ... 1024x_1).")
@click.option("--delta", type=float, default=None, help="Cut of the ε-split bound (default x_1).")
@domain_errors
def halfspace_repr(m, N, q, output, seed, x, radii, delta):
    """Truncated representation integrals of the pushed bump field on growing half-balls."""
    config = _run_config(Command.halfspace_repr, N, m, q, output, seed)
    xp = _point(x, N, "x")
    schedule = None
    if radii is not None:
        try:
            schedule = parse_comma_separated_floats(radii)
        except ValueError as exc:
            raise click.BadParameter(str(exc), param_hint="--radii")
    field = pushed_bump_field(config.params)
    report = halfspace_representation(field, xp, config.quadrature, schedule, delta)
    report.metadata = make_metadata(config.seed, _argv())
    write_json(report, _output_path(config, "halfspace-repr.json"))
    click.echo("u(x) = {:.12e}, truncated = {:.12e}".format(float(field.u(xp[None])[0]), report.value))
    return 0


@cli.command("ode-run")
@click.option("--m", "m", type=int, required=True)
@click.option("--q", "q", type=float, default=2.0, show_default=True)
@click.option("--extension", type=click.Choice(["abs", "zero"]), default="abs", show_default=True)
@click.option("--initial", required=True, help="Free derivatives u^(m)(0), ..., u^(2m-1)(0), comma-separated.")
@click.option("--t-end", type=float, default=10.0, show_default=True)
@click.option("--tol", type=float, default=1e-12, show_default=True)
@click.option("--bound-cap", type=float, default=None)
@output_options
@domain_errors
def ode_run(m, q, extension, initial, t_end, tol, bound_cap, output, seed):
    """Integrate (-1)^m u^(2m) = f(u) from Dirichlet data and write the trajectory CSV."""
    config = _run_config(Command.ode_run, 1, m, q, output, seed)
    free = _free_derivatives(initial, m)
    nl = power_nonlinearity(q, extension)
    state = ODEState.create(0.0, np.concatenate([np.zeros(m), free]), nl, m)
    try:
        trajectory = integrate(state, nl, m, t_end, tol=tol, bound_cap=bound_cap)
    except BlowUp as exc:
        click.echo("Blow-up at t = {:.6g}".format(exc.escape_time))
        return 1
    write_trajectory(trajectory, _output_path(config, "ode-run.csv"))
    click.echo("H drift {:.3e} over {} steps".format(trajectory.h_drift, len(trajectory.t) - 1))
    return 0


def _free_derivatives(value: str, m: int) -> np.ndarray:
    try:
        free = parse_comma_separated_floats(value)
    except ValueError as exc:
        raise click.BadParameter(str(exc), param_hint="--initial")
    if len(free) != m:
        raise click.BadParameter("expected m = {} values, got {}".format(m, len(free)), param_hint="--initial")
    return np.asarray(free)


@cli.command("ode-scan")
@click.option("--m", "m", type=int, required=True)
@click.option("--q", "q", type=float, default=2.0, show_default=True)
@click.option("--extension", type=click.Choice(["abs", "zero"]), default="abs", show_default=True)
@click.option("--grid-min", type=float, default=-0.1, show_default=True)
@click.option("--grid-max", type=float, default=0.1, show_default=True)
@click.option("--grid-points", type=int, default=5, show_default=True, help="Points per free derivative.")
@click.option("--t-end", type=float, default=10.0, show_default=True)
@click.option("--bound-cap", type=float, default=1e6, show_default=True)
@output_options
@domain_errors
def ode_scan(m, q, extension, grid_min, grid_max, grid_points, t_end, bound_cap, output, seed):
    """Horizon-relative boundedness verdicts over a grid of free initial derivatives."""
    config = _run_config(Command.ode_scan, 1, m, q, output, seed)
    if grid_points < 1:
        raise click.BadParameter("must be positive", param_hint="--grid-points")
    axis = np.linspace(grid_min, grid_max, grid_points)
    grid = np.stack(np.meshgrid(*([axis] * m), indexing="ij"), axis=-1).reshape(-1, m)
    report = bounded_solution_scan(power_nonlinearity(q, extension), m, grid, t_end, bound_cap)
    report.metadata = make_metadata(config.seed, _argv())
    write_json(report, _output_path(config, "ode-scan.json"))
    counts = {}
    for verdict in report.verdicts:
        counts[verdict.verdict.value] = counts.get(verdict.verdict.value, 0) + 1
    click.echo(", ".join("{}: {}".format(k, v) for k, v in sorted(counts.items())))
    return 0


@cli.command("rescale-check")
@params_options
@output_options
@click.option("--order", type=int, default=0, show_default=True, help="Coefficient order |α| <= 2m-1.")
@click.option("--M-values", "M_values", default="10,100,1000,10000", show_default=True)
@domain_errors
def rescale_check(m, N, q, output, seed, order, M_values):
    """Fit the decay rate of a rescaled lower-order coefficient."""
    config = _run_config(Command.rescale_check, N, m, q, output, seed)
    if not 0 <= order <= 2 * m - 1:
        raise click.BadParameter("must lie in [0, 2m-1]", param_hint="--order")
    try:
        values = parse_comma_separated_floats(M_values)
    except ValueError as exc:
        raise click.BadParameter(str(exc), param_hint="--M-values")
    coefficient = CoefficientMap(order=(order,) + (0,) * (N - 1),
                                 values=lambda Y: 2.0 + 0.1 * np.sin(np.sum(Y, axis=1)))
    report = lower_order_vanishing(values, coefficient, config.params, seed=config.seed)
    report.metadata = make_metadata(config.seed, _argv())
    write_json(report, _output_path(config, "rescale-check.json"))
    click.echo("slope {:.6f}, expected {:.6f}".format(report.fitted_slope, report.expected_exponent))
    return 0 if report.within_tolerance else 1


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Runs the command line and maps the outcome to 0 (success), 1 (check violations) or 2 (usage)."""
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        result = _invoke(argv)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        exc.show()
        return 2
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except click.exceptions.Abort:
        return 1
    return result if isinstance(result, int) else 0


def _invoke(argv: List[str]):
    with cli.make_context("polyharmonic", argv) as ctx:
        ctx.meta["argv"] = argv
        return cli.invoke(ctx)


if __name__ == "__main__":
    sys.exit(main())
