from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quenchlab.cli import main
from quenchlab.config import (
    RunConfig,
    emit_config,
    evaluate_initial_data,
    parse_config,
)
from quenchlab.grid_kernel import ConfigurationError

FIGURE2_CONFIG = """
# Figure-2 setup
domain.a = -2
domain.b = 2
grid.n = 100
kernel.name = epanechnikov
params.lambda = 0.1
params.mu = 0.001
params.p = 2
params.q = 3
"""


def _write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_parse_minimal_figure2_config(tmp_path):
    config = parse_config(_write(tmp_path, FIGURE2_CONFIG))
    assert config.grid_n == 100
    assert config.lam == 0.1 and config.mu == 0.001
    assert config.p == 2.0 and config.q == 3.0
    assert config.kernel_name == "epanechnikov"
    assert config.initial_u == "1" and config.initial_v == "1"


def test_missing_lambda_names_key(tmp_path):
    text = FIGURE2_CONFIG.replace("params.lambda = 0.1\n", "")
    with pytest.raises(ConfigurationError, match="params.lambda"):
        parse_config(_write(tmp_path, text))


def test_zero_grid_rejected(tmp_path):
    text = FIGURE2_CONFIG.replace("grid.n = 100", "grid.n = 0")
    with pytest.raises(ConfigurationError, match="grid.n"):
        parse_config(_write(tmp_path, text))


def test_unknown_key_rejected(tmp_path):
    with pytest.raises(ConfigurationError, match="params.gamma"):
        parse_config(_write(tmp_path, FIGURE2_CONFIG + "params.gamma = 1\n"))


def test_duplicate_key_rejected(tmp_path):
    with pytest.raises(ConfigurationError, match="duplicate"):
        parse_config(_write(tmp_path, FIGURE2_CONFIG + "params.p = 4\n"))


def test_bad_value_names_key_and_line(tmp_path):
    with pytest.raises(ConfigurationError, match="solver.rtol"):
        parse_config(_write(tmp_path, FIGURE2_CONFIG + "solver.rtol = fast\n"))


def test_roundtrip_fixed_config(tmp_path):
    text = FIGURE2_CONFIG + "output.snapshots = 0.5,1.5\nsolver.rtol = 1e-7\n"
    config = parse_config(_write(tmp_path, text))
    back = parse_config(_write(tmp_path, emit_config(config), name="echo.cfg"))
    assert back == config


@given(
    lam=st.floats(1e-6, 10.0, allow_nan=False),
    mu=st.floats(1e-6, 10.0, allow_nan=False),
    p=st.floats(0.05, 6.0, allow_nan=False),
    q=st.floats(0.05, 6.0, allow_nan=False),
    n=st.integers(1, 500),
    rtol=st.floats(1e-12, 1e-2, allow_nan=False),
)
@settings(max_examples=40, deadline=None)
def test_roundtrip_property(tmp_path_factory, lam, mu, p, q, n, rtol):
    config = RunConfig(lam=lam, mu=mu, p=p, q=q, grid_n=n, rtol=rtol)
    path = tmp_path_factory.mktemp("cfg") / "c.cfg"
    path.write_text(emit_config(config))
    assert parse_config(path) == config


def test_expression_grammar():
    x = np.linspace(-2, 2, 9)
    assert np.allclose(evaluate_initial_data("1", x), 1.0)
    assert np.allclose(evaluate_initial_data("0.5 + 0.1*x*x", x), 0.5 + 0.1 * x * x)
    assert np.allclose(
        evaluate_initial_data("max(0.2, 1 - abs(x))", x), np.maximum(0.2, 1 - np.abs(x))
    )
    assert np.allclose(evaluate_initial_data("exp(-x*x)", x), np.exp(-x * x))
    assert np.allclose(
        evaluate_initial_data("min(1, 2, 3 - x)", x), np.minimum(1, np.minimum(2, 3 - x))
    )
    assert np.allclose(evaluate_initial_data("(1 + x/4) / 2", x), (1 + x / 4) / 2)


@pytest.mark.parametrize(
    "expr",
    [
        "__import__('os').system('true')",
        "x ** 2",
        "y + 1",
        "lambda v: v",
        "[1, 2]",
        "exp()",
        "min(1)",
        "x < 1",
        "-1",  # negative constant data
    ],
)
def test_expression_rejections(expr):
    x = np.linspace(-2, 2, 5)
    with pytest.raises(ConfigurationError):
        evaluate_initial_data(expr, x)


def test_initial_data_file(tmp_path):
    x = np.linspace(-2, 2, 9)
    path = tmp_path / "u0.txt"
    np.savetxt(path, np.column_stack([x, 1.0 + 0.1 * x]), fmt="%.17g")
    values = evaluate_initial_data(f"file:{path}", x)
    assert np.allclose(values, 1.0 + 0.1 * x)
    wrong = np.linspace(-2, 2, 7)
    with pytest.raises(ConfigurationError, match="match the grid"):
        evaluate_initial_data(f"file:{path}", wrong)


SMALL_QUENCH_CONFIG = """
domain.a = -2
domain.b = 2
grid.n = 16
kernel.name = epanechnikov
params.lambda = 0.1
params.mu = 0.001
params.p = 2
params.q = 3
solver.rtol = 1e-6
solver.atol = 1e-12
solver.dt_min = 1e-14
solver.quench_threshold = 1e-4
solver.t_max = 60
output.snapshots = 1.0,5.0
"""


@pytest.fixture(scope="module")
def simulate_out(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("sim")
    config_path = tmp / "run.cfg"
    config_path.write_text(SMALL_QUENCH_CONFIG)
    out = tmp / "out"
    code = main(["simulate", "--config", str(config_path), "--out", str(out)])
    return code, out


def test_cli_simulate_exit_and_artifacts(simulate_out):
    code, out = simulate_out
    assert code == 0
    for name in ("trajectory.csv", "snapshots.csv", "report.json", "rate_points.csv", "manifest.json"):
        assert (out / name).exists(), name


def test_cli_simulate_report_contents(simulate_out):
    _, out = simulate_out
    report = json.loads((out / "report.json").read_text())
    assert report["outcome"] == "quenched"
    assert report["regime_predicted"] == "simultaneous"
    assert report["t_est"] > 0
    assert report["quench_set"] == [0.0]


def test_cli_manifest_checksums(simulate_out):
    import hashlib

    _, out = simulate_out
    manifest = json.loads((out / "manifest.json").read_text())
    listed = {entry["path"] for entry in manifest["outputs"]}
    produced = {p.name for p in out.iterdir() if p.name != "manifest.json"}
    assert listed == produced
    for entry in manifest["outputs"]:
        digest = hashlib.sha256((out / entry["path"]).read_bytes()).hexdigest()
        assert digest == entry["sha256"]
    assert manifest["config"]["params.lambda"] == "0.10000000000000001"


def test_cli_rates_on_trajectory(simulate_out, tmp_path):
    _, out = simulate_out
    config_path = tmp_path / "rates.cfg"
    config_path.write_text(
        SMALL_QUENCH_CONFIG
        + f"rates.trajectory = {out / 'trajectory.csv'}\n"
        + f"rates.report = {out / 'report.json'}\n"
        + "rates.window_lo = 1e-4\nrates.window_hi = 1e-1\n"
    )
    rates_out = tmp_path / "rates_out"
    code = main(["rates", "--config", str(config_path), "--out", str(rates_out)])
    assert code == 0
    rows = (rates_out / "rates.csv").read_text().strip().splitlines()
    assert rows[0].startswith("component,slope")
    assert len(rows) >= 2
    points = (rates_out / "rate_points.csv").read_text().splitlines()
    assert points[0] == "log_T_minus_t,log_min_u,log_min_v"


def test_cli_stationary(tmp_path):
    config_path = tmp_path / "stat.cfg"
    config_path.write_text(
        SMALL_QUENCH_CONFIG.replace("params.lambda = 0.1", "params.lambda = 0.001")
    )
    out = tmp_path / "out"
    code = main(["stationary", "--config", str(config_path), "--out", str(out)])
    assert code == 0
    data = np.loadtxt(out / "stationary.csv", delimiter=",", skiprows=1)
    z = data[:, 2]
    z_floor = 0.001**0.5
    assert np.all(z > z_floor) and np.all(z <= 1.0 + 1e-12)
    report = json.loads((out / "report.json").read_text())
    assert report["converged"] is True


def test_cli_stationary_no_solution(tmp_path):
    config_path = tmp_path / "stat.cfg"
    config_path.write_text(
        SMALL_QUENCH_CONFIG.replace("params.lambda = 0.1", "params.lambda = 1.5")
    )
    out = tmp_path / "out"
    code = main(["stationary", "--config", str(config_path), "--out", str(out)])
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["converged"] is False


def test_cli_region_small(tmp_path):
    config_path = tmp_path / "region.cfg"
    config_path.write_text(
        """
domain.a = -2
domain.b = 2
grid.n = 8
kernel.name = epanechnikov
params.lambda = 0.1
params.mu = 0.1
params.p = 2
params.q = 2
solver.rtol = 1e-5
solver.atol = 1e-10
solver.quench_threshold = 1e-4
solver.t_max = 150
solver.dt_max = 50
region.lambda_min = 0
region.lambda_max = 0.5
region.mu_min = 0
region.mu_max = 0.5
region.resolution = 2
region.bisect_steps = 2
"""
    )
    out = tmp_path / "out"
    code = main(["region", "--config", str(config_path), "--out", str(out)])
    assert code == 0
    assert (out / "region.csv").exists() and (out / "boundary.csv").exists()


def test_cli_region_requires_range_keys(tmp_path):
    config_path = tmp_path / "region.cfg"
    config_path.write_text(SMALL_QUENCH_CONFIG)
    code = main(["region", "--config", str(config_path), "--out", str(tmp_path / "out")])
    assert code == 1


def test_cli_shoot_small(tmp_path):
    config_path = tmp_path / "shoot.cfg"
    config_path.write_text(
        """
domain.a = -2
domain.b = 2
grid.n = 8
kernel.name = epanechnikov
params.lambda = 1
params.mu = 1
params.p = 0.5
params.q = 0.5
initial.u = 0.2
initial.v = 0.2
solver.dt_init = 1e-4
solver.t_max = 5
shoot.delta_samples = 5
shoot.bisect_steps = 3
"""
    )
    out = tmp_path / "out"
    code = main(["shoot", "--config", str(config_path), "--out", str(out)])
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["bracket"][0] < report["bracket"][1]
    rows = (out / "shooting.csv").read_text().strip().splitlines()
    assert len(rows) == 1 + 5 + 3


def test_cli_config_error_exit_code(tmp_path):
    config_path = tmp_path / "bad.cfg"
    config_path.write_text("params.lambda = 0.1\n")  # missing mu, p, q
    assert main(["simulate", "--config", str(config_path), "--out", str(tmp_path)]) == 1


def test_cli_missing_config_file(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "nope.cfg"), "--out", str(tmp_path)]) == 1
