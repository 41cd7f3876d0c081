"""Flat ``section.key = value`` run configuration: parsing, validation, emission.

Initial data accept three spellings: a numeric constant, a tiny expression in
``x`` (constants, ``+ - * /``, ``abs``, ``min``, ``max``, ``exp``,
parentheses), or ``file:PATH`` pointing at two-column ``x value`` text whose
abscissae match the grid nodes.
"""

from __future__ import annotations

import ast
import operator
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Callable

import numpy as np

from .grid_kernel import ConfigurationError
from .integrator import SolverConfig


@dataclass
class RunConfig:
    domain_a: float = -2.0
    domain_b: float = 2.0
    grid_n: int = 100
    kernel_name: str = "epanechnikov"
    kernel_file: str | None = None
    lam: float | None = None
    mu: float | None = None
    p: float | None = None
    q: float | None = None
    initial_u: str = "1"
    initial_v: str = "1"
    rtol: float = 1e-6
    atol: float = 1e-12
    dt_init: float = 1e-3
    dt_min: float = 1e-14
    dt_max: float = 10.0
    quench_threshold: float = 1e-6
    steady_tol: float = 1e-9
    t_max: float = 400.0
    record_stride: int = 1
    snapshots: tuple[float, ...] = ()
    cluster_radius: float | None = None
    rates_window_lo: float = 1e-5
    rates_window_hi: float = 1e-2
    rates_trajectory: str | None = None
    rates_report: str | None = None
    rates_t_est: float | None = None
    region_lambda_min: float | None = None
    region_lambda_max: float | None = None
    region_mu_min: float | None = None
    region_mu_max: float | None = None
    region_resolution: int = 8
    region_bisect_steps: int = 6
    shoot_delta_samples: int = 33
    shoot_bisect_steps: int = 20

    def solver_config(self) -> SolverConfig:
        return SolverConfig(
            rtol=self.rtol,
            atol=self.atol,
            dt_init=self.dt_init,
            dt_min=self.dt_min,
            dt_max=self.dt_max,
            quench_threshold=self.quench_threshold,
            steady_tol=self.steady_tol,
            t_max=self.t_max,
            record_stride=self.record_stride,
            snapshot_times=self.snapshots,
        )


def _parse_float(raw: str) -> float:
    return float(raw)


def _parse_int(raw: str) -> int:
    value = int(raw)
    return value


def _parse_str(raw: str) -> str:
    return raw


def _parse_times(raw: str) -> tuple[float, ...]:
    raw = raw.strip()
    if not raw:
        return ()
    return tuple(float(part) for part in raw.split(","))


# config key -> (dataclass field, parser)
_KEYMAP: dict[str, tuple[str, Callable[[str], object]]] = {
    "domain.a": ("domain_a", _parse_float),
    "domain.b": ("domain_b", _parse_float),
    "grid.n": ("grid_n", _parse_int),
    "kernel.name": ("kernel_name", _parse_str),
    "kernel.file": ("kernel_file", _parse_str),
    "params.lambda": ("lam", _parse_float),
    "params.mu": ("mu", _parse_float),
    "params.p": ("p", _parse_float),
    "params.q": ("q", _parse_float),
    "initial.u": ("initial_u", _parse_str),
    "initial.v": ("initial_v", _parse_str),
    "solver.rtol": ("rtol", _parse_float),
    "solver.atol": ("atol", _parse_float),
    "solver.dt_init": ("dt_init", _parse_float),
    "solver.dt_min": ("dt_min", _parse_float),
    "solver.dt_max": ("dt_max", _parse_float),
    "solver.quench_threshold": ("quench_threshold", _parse_float),
    "solver.steady_tol": ("steady_tol", _parse_float),
    "solver.t_max": ("t_max", _parse_float),
    "solver.record_stride": ("record_stride", _parse_int),
    "output.snapshots": ("snapshots", _parse_times),
    "analysis.cluster_radius": ("cluster_radius", _parse_float),
    "rates.window_lo": ("rates_window_lo", _parse_float),
    "rates.window_hi": ("rates_window_hi", _parse_float),
    "rates.trajectory": ("rates_trajectory", _parse_str),
    "rates.report": ("rates_report", _parse_str),
    "rates.t_est": ("rates_t_est", _parse_float),
    "region.lambda_min": ("region_lambda_min", _parse_float),
    "region.lambda_max": ("region_lambda_max", _parse_float),
    "region.mu_min": ("region_mu_min", _parse_float),
    "region.mu_max": ("region_mu_max", _parse_float),
    "region.resolution": ("region_resolution", _parse_int),
    "region.bisect_steps": ("region_bisect_steps", _parse_int),
    "shoot.delta_samples": ("shoot_delta_samples", _parse_int),
    "shoot.bisect_steps": ("shoot_bisect_steps", _parse_int),
}

_FIELD_TO_KEY = {field_name: key for key, (field_name, _) in _KEYMAP.items()}
_REQUIRED_KEYS = ("params.lambda", "params.mu", "params.p", "params.q")


def parse_config(path: str | Path) -> RunConfig:
    """Parse and validate a flat config file; unknown or malformed keys are fatal."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    values: dict[str, object] = {}
    seen: set[str] = set()
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected 'key = value', got {raw_line!r}")
        key, raw_value = (part.strip() for part in line.split("=", 1))
        if key not in _KEYMAP:
            raise ConfigurationError(f"{path}:{lineno}: unknown key '{key}'")
        if key in seen:
            raise ConfigurationError(f"{path}:{lineno}: duplicate key '{key}'")
        seen.add(key)
        field_name, parser = _KEYMAP[key]
        try:
            values[field_name] = parser(raw_value)
        except ValueError as exc:
            raise ConfigurationError(f"{path}:{lineno}: bad value for '{key}': {exc}") from exc
    for key in _REQUIRED_KEYS:
        if _KEYMAP[key][0] not in values:
            raise ConfigurationError(f"{path}: missing required key '{key}'")
    config = RunConfig(**values)
    _validate(config, path)
    return config


def _validate(config: RunConfig, path: Path) -> None:
    if config.grid_n < 1:
        raise ConfigurationError(f"{path}: grid.n must be >= 1, got {config.grid_n}")
    if not (config.domain_a < config.domain_b):
        raise ConfigurationError(f"{path}: domain.a must be < domain.b")
    if config.p is not None and config.p <= 0:
        raise ConfigurationError(f"{path}: params.p must be positive")
    if config.q is not None and config.q <= 0:
        raise ConfigurationError(f"{path}: params.q must be positive")
    if config.lam is not None and config.lam < 0:
        raise ConfigurationError(f"{path}: params.lambda must be nonnegative")
    if config.mu is not None and config.mu < 0:
        raise ConfigurationError(f"{path}: params.mu must be nonnegative")
    if not (0 < config.rates_window_lo < config.rates_window_hi):
        raise ConfigurationError(f"{path}: rates window must satisfy 0 < lo < hi")
    if config.cluster_radius is not None and config.cluster_radius <= 0:
        raise ConfigurationError(f"{path}: analysis.cluster_radius must be positive")
    if config.region_resolution < 2:
        raise ConfigurationError(f"{path}: region.resolution must be >= 2")
    if config.region_bisect_steps < 0 or config.shoot_bisect_steps < 0:
        raise ConfigurationError(f"{path}: bisect steps must be >= 0")
    if config.shoot_delta_samples < 3:
        raise ConfigurationError(f"{path}: shoot.delta_samples must be >= 3")
    for name, file_field in (("kernel.file", config.kernel_file),):
        if file_field is not None and not Path(file_field).exists():
            raise ConfigurationError(f"{path}: {name} points at missing file '{file_field}'")
    for spec_name, spec in (("initial.u", config.initial_u), ("initial.v", config.initial_v)):
        if spec.startswith("file:"):
            data_path = spec[len("file:"):]
            if not Path(data_path).exists():
                raise ConfigurationError(f"{path}: {spec_name} points at missing file '{data_path}'")
    config.solver_config()  # surfaces solver-field range errors


def emit_config(config: RunConfig) -> str:
    """Serialize back to the flat format; parse(emit(c)) == c for valid configs."""
    lines = []
    for f in fields(RunConfig):
        value = getattr(config, f.name)
        if value is None:
            continue
        key = _FIELD_TO_KEY[f.name]
        if isinstance(value, tuple):
            if not value:
                continue
            rendered = ",".join(f"{t:.17g}" for t in value)
        elif isinstance(value, float):
            rendered = f"{value:.17g}"
        else:
            rendered = str(value)
        lines.append(f"{key} = {rendered}")
    return "\n".join(lines) + "\n"


def config_echo(config: RunConfig) -> dict[str, str]:
    """Flat key -> rendered value mapping for the run manifest."""
    echo: dict[str, str] = {}
    for line in emit_config(config).strip().splitlines():
        key, value = (part.strip() for part in line.split("=", 1))
        echo[key] = value
    return echo


_BIN_OPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
}

_FUNCS: dict[str, Callable] = {
    "abs": np.abs,
    "exp": np.exp,
    "min": np.minimum,
    "max": np.maximum,
}


def _eval_node(node: ast.AST, x: np.ndarray) -> np.ndarray | float:
    if isinstance(node, ast.Expression):
        return _eval_node(node.body, x)
    if isinstance(node, ast.Constant):
        if isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return float(node.value)
        raise ConfigurationError(f"non-numeric constant {node.value!r} in expression")
    if isinstance(node, ast.Name):
        if node.id == "x":
            return x
        raise ConfigurationError(f"unknown name '{node.id}' in expression (only 'x' is allowed)")
    if isinstance(node, ast.BinOp) and type(node.op) in _BIN_OPS:
        return _BIN_OPS[type(node.op)](_eval_node(node.left, x), _eval_node(node.right, x))
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        val = _eval_node(node.operand, x)
        return -val if isinstance(node.op, ast.USub) else val
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS or node.keywords:
            raise ConfigurationError("only abs, exp, min, max calls are allowed in expressions")
        name = node.func.id
        args = [_eval_node(arg, x) for arg in node.args]
        if name in ("abs", "exp"):
            if len(args) != 1:
                raise ConfigurationError(f"{name}() takes exactly one argument")
            return _FUNCS[name](args[0])
        if len(args) < 2:
            raise ConfigurationError(f"{name}() takes at least two arguments")
        result = args[0]
        for arg in args[1:]:
            result = _FUNCS[name](result, arg)
        return result
    raise ConfigurationError(f"unsupported syntax in expression: {ast.dump(node)}")


def evaluate_initial_data(spec: str, nodes: np.ndarray) -> np.ndarray:
    """Evaluate an initial-data spec on the grid nodes and demand positivity."""
    spec = spec.strip()
    if spec.startswith("file:"):
        data_path = spec[len("file:"):]
        data = np.loadtxt(data_path, dtype=float, ndmin=2)
        if data.shape[1] != 2:
            raise ConfigurationError(f"initial-data file {data_path} must have two columns")
        if data.shape[0] != nodes.size or np.max(np.abs(data[:, 0] - nodes)) > 1e-8:
            raise ConfigurationError(
                f"initial-data file {data_path} abscissae do not match the grid nodes"
            )
        values = data[:, 1].astype(float)
    else:
        try:
            tree = ast.parse(spec, mode="eval")
        except SyntaxError as exc:
            raise ConfigurationError(f"cannot parse initial-data expression {spec!r}: {exc}") from exc
        values = np.broadcast_to(
            np.asarray(_eval_node(tree, nodes), dtype=float), nodes.shape
        ).copy()
    if not np.isfinite(values).all():
        raise ConfigurationError(f"initial data {spec!r} evaluates to non-finite values")
    if np.any(values <= 0):
        raise ConfigurationError(f"initial data {spec!r} must be strictly positive on the grid")
    return values
