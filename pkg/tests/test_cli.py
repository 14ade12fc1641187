import json
import math

import pytest

from cli import cli, main


def test_kernel_eval(runner):
    result = runner.invoke(cli, ["kernel-eval", "--m", "1", "--N", "3", "--x", "0,0,0", "--y", "0.5,0,0"])
    assert result.exit_code == 0
    assert float(result.output.strip()) == pytest.approx(1 / (4 * math.pi), rel=1e-13)

def test_kernel_eval_with_psi(runner):
    result = runner.invoke(cli, ["kernel-eval", "--m", "1", "--N", "3", "--x", "0,0,0", "--y", "0.5,0,0",
                                 "--show-psi"])
    assert result.exit_code == 0
    assert result.output.splitlines()[1] == "psi=3"

def test_kernel_eval_half_space(runner):
    result = runner.invoke(cli, ["kernel-eval", "--m", "2", "--N", "3", "--domain", "half-space",
                                 "--x", "1,0,0", "--y", "2,0.5,0"])
    assert result.exit_code == 0
    assert float(result.output.strip()) > 0

def test_kernel_eval_plane(runner):
    result = runner.invoke(cli, ["kernel-eval", "--m", "1", "--N", "2", "--x", "0,0", "--y", "0.9,0"])
    assert result.exit_code == 0
    assert float(result.output.strip()) == pytest.approx(-math.log(0.9) / (2 * math.pi), rel=1e-12)

@pytest.mark.parametrize(
    "argv, code",
    [
        pytest.param(["--help"], 0, id="help"),
        pytest.param(["kernel-eval", "--m", "1", "--N", "3", "--x", "0,0", "--y", "0.5,0,0"], 2, id="bad_point"),
        pytest.param(["kernel-eval", "--m", "0", "--N", "3", "--x", "0,0,0", "--y", "0.5,0,0"], 2, id="bad_order"),
        pytest.param(["kernel-eval", "--m", "1", "--N", "3", "--x", "0.2,0,0", "--y", "0.2,0,0"], 1, id="coincident"),
        pytest.param(["kernel-eval", "--m", "1", "--N", "3", "--x", "0,0,0", "--y", "0.5,0,0"], 0, id="ok"),
        pytest.param(["no-such-command"], 2, id="unknown_command"),
    ]
)
def test_main_exit_codes(argv, code):
    assert main(argv) == code

def test_ode_run_writes_trajectory(tmp_path):
    code = main(["ode-run", "--m", "1", "--extension", "zero", "--initial", "1", "--t-end", "5",
                 "--output", str(tmp_path)])
    assert code == 0
    lines = (tmp_path / "ode-run.csv").read_text().splitlines()
    assert lines[0] == "# schema_version=1.0"
    assert lines[1] == "t,u,u1,H"

def test_ode_run_blow_up(tmp_path):
    code = main(["ode-run", "--m", "1", "--initial", "1", "--t-end", "100", "--bound-cap", "1e6",
                 "--tol", "1e-10", "--output", str(tmp_path)])
    assert code == 1
    assert not (tmp_path / "ode-run.csv").exists()

def test_ode_run_initial_length(tmp_path):
    assert main(["ode-run", "--m", "2", "--initial", "1", "--output", str(tmp_path)]) == 2

def test_ode_scan(tmp_path):
    code = main(["ode-scan", "--m", "1", "--grid-min", "0", "--grid-max", "1", "--grid-points", "2",
                 "--t-end", "100", "--output", str(tmp_path)])
    assert code == 0
    report = json.loads((tmp_path / "ode-scan.json").read_text())
    assert [item["verdict"] for item in report["verdicts"]] == ["StaysBounded", "BlowsUp"]
    assert report["metadata"]["argv"][0] == "ode-scan"

def test_verify_writes_report(tmp_path):
    code = main(["verify", "--suite", "rescale", "--m", "1", "--N", "2", "--output", str(tmp_path)])
    report = json.loads((tmp_path / "verify-rescale.json").read_text())
    assert report["suite"] == "rescale"
    assert report["schema_version"] == "1.0"
    assert code == (0 if report["summary"]["failed"] == 0 else 1)
    cases = {case["name"]: case["status"] for case in report["cases"]}
    assert cases["equation_covariance"] == "passed"

@pytest.mark.parametrize("m, N", [(2, 5), (3, 7)], ids=["m2_N5", "m3_N7"])
def test_verify_movingplane_pointwise_bound(tmp_path, m, N):
    main(["verify", "--suite", "movingplane", "--m", str(m), "--N", str(N), "--samples", "2000",
          "--output", str(tmp_path)])
    report = json.loads((tmp_path / "verify-movingplane.json").read_text())
    cases = {case["name"]: case["status"] for case in report["cases"]}
    assert cases["pointwise_bound_stability"] == "passed"

def test_verify_unknown_suite(tmp_path):
    assert main(["verify", "--suite", "nope", "--m", "1", "--N", "2", "--output", str(tmp_path)]) == 2

def test_solve_ball(tmp_path):
    code = main(["solve-ball", "--m", "1", "--N", "3", "--delta", "1e-4", "--n-radial", "4", "--angular-order", "4",
                 "--output", str(tmp_path)])
    report = json.loads((tmp_path / "solve-ball.json").read_text())
    assert report["verdict"] == "Converged"
    assert code == 0
    history = (tmp_path / "solve-ball-history.csv").read_text().splitlines()
    assert history[1] == "iter,sup_norm,increment,residual"

def test_rescale_check(tmp_path):
    code = main(["rescale-check", "--m", "2", "--N", "3", "--q", "3", "--order", "1", "--output", str(tmp_path)])
    report = json.loads((tmp_path / "rescale-check.json").read_text())
    assert report["expected_exponent"] == pytest.approx(-1.5)
    assert code == (0 if report["within_tolerance"] else 1)

def test_rescale_check_order_out_of_range(tmp_path):
    assert main(["rescale-check", "--m", "1", "--N", "3", "--order", "2", "--output", str(tmp_path)]) == 2
