"""Command-line front end: orchestrates the five experiments and emits artifacts.

Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 unresolved classification (region cells left undecided after escalation).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import platform
import sys
import time
from pathlib import Path

import numpy as np

import quenchlab

from .config import RunConfig, config_echo, evaluate_initial_data, parse_config
from .grid_kernel import (
    ConfigurationError,
    Grid,
    NonlocalOperator,
    build_grid,
    build_operator,
    kernel_from_name,
    kernel_from_table,
)
from .integrator import NumericalFailure, Quenched, SolverConfig, Steady, integrate
from .model import NumericalOverflow, State, SystemParams
from .quench_analysis import (
    InsufficientWindow,
    build_report,
    fit_rate,
    write_rate_fits_csv,
    write_rate_points_csv,
)
from .shooting import ShootingConfig, run_shooting
from .stationary import (
    PointClass,
    UnresolvedClassification,
    map_region,
    solve_stationary_newton,
)
from .integrator import Trajectory


def _build_problem(
    config: RunConfig,
) -> tuple[Grid, NonlocalOperator, SystemParams, SolverConfig]:
    grid = build_grid(config.domain_a, config.domain_b, config.grid_n)
    if config.kernel_file is not None:
        kernel = kernel_from_table(config.kernel_file)
    else:
        kernel = kernel_from_name(config.kernel_name)
    op = build_operator(grid, kernel)
    params = SystemParams(lam=config.lam, mu=config.mu, p=config.p, q=config.q)
    return grid, op, params, config.solver_config()


def _initial_state(config: RunConfig, grid: Grid) -> State:
    u0 = evaluate_initial_data(config.initial_u, grid.nodes)
    v0 = evaluate_initial_data(config.initial_v, grid.nodes)
    return State(0.0, u0, v0)


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    digest.update(path.read_bytes())
    return digest.hexdigest()


def _write_manifest(
    out_dir: Path,
    subcommand: str,
    config: RunConfig,
    outputs: list[Path],
    wall_time: float,
    seed: int | None,
) -> None:
    manifest = {
        "subcommand": subcommand,
        "config": config_echo(config),
        "package_version": quenchlab.__version__,
        "python_version": platform.python_version(),
        "numpy_version": np.__version__,
        "wall_time_s": wall_time,
        "seed": seed,
        "outputs": [
            {"path": p.name, "sha256": _sha256(p), "bytes": p.stat().st_size}
            for p in sorted(outputs)
        ],
    }
    _write_json(out_dir / "manifest.json", manifest)


def _cmd_simulate(config: RunConfig, out_dir: Path) -> tuple[int, list[Path]]:
    grid, op, params, solver = _build_problem(config)
    state0 = _initial_state(config, grid)
    trajectory, outcome = integrate(state0, op, params, solver)
    report = build_report(
        trajectory,
        outcome,
        grid,
        params,
        eps_q=solver.quench_threshold,
        window=(config.rates_window_lo, config.rates_window_hi),
        cluster_radius=config.cluster_radius,
    )
    outputs = []
    traj_path = out_dir / "trajectory.csv"
    trajectory.to_csv(traj_path, grid)
    outputs.append(traj_path)
    snap_path = out_dir / "snapshots.csv"
    trajectory.snapshots_to_csv(snap_path, grid)
    outputs.append(snap_path)
    report_path = out_dir / "report.json"
    _write_json(report_path, report.to_dict())
    outputs.append(report_path)
    if isinstance(outcome, Quenched):
        points_path = out_dir / "rate_points.csv"
        write_rate_points_csv(points_path, trajectory, outcome.t_est)
        outputs.append(points_path)
    return 0, outputs


def _cmd_stationary(config: RunConfig, out_dir: Path) -> tuple[int, list[Path]]:
    grid, op, params, _ = _build_problem(config)
    state0 = _initial_state(config, grid)
    pair = solve_stationary_newton(op, params, init=(state0.u, state0.v))
    outputs = []
    report: dict = {"converged": pair is not None, "lambda": params.lam, "mu": params.mu}
    if pair is not None:
        csv_path = out_dir / "stationary.csv"
        with open(csv_path, "w", newline="") as fh:
            fh.write("x,w,z\n")
            for x, w, z in zip(grid.nodes, pair.w, pair.z):
                fh.write(f"{x:.17g},{w:.17g},{z:.17g}\n")
        outputs.append(csv_path)
        w_lo, w_hi, z_lo, z_hi = pair.bound_margins(params)
        report.update(
            {
                "residual": pair.residual,
                "margin_w_lower": w_lo,
                "margin_w_upper": w_hi,
                "margin_z_lower": z_lo,
                "margin_z_upper": z_hi,
            }
        )
    report_path = out_dir / "report.json"
    _write_json(report_path, report)
    outputs.append(report_path)
    return 0, outputs


def _cmd_region(config: RunConfig, out_dir: Path) -> tuple[int, list[Path]]:
    required = {
        "region.lambda_min": config.region_lambda_min,
        "region.lambda_max": config.region_lambda_max,
        "region.mu_min": config.region_mu_min,
        "region.mu_max": config.region_mu_max,
    }
    missing = [key for key, value in required.items() if value is None]
    if missing:
        raise ConfigurationError(f"region subcommand requires keys: {', '.join(missing)}")
    grid, op, params, solver = _build_problem(config)
    region = map_region(
        op,
        params.p,
        params.q,
        (config.region_lambda_min, config.region_lambda_max),
        (config.region_mu_min, config.region_mu_max),
        config.region_resolution,
        solver,
        bisect_steps=config.region_bisect_steps,
    )
    outputs = []
    region_path = out_dir / "region.csv"
    region.to_csv(region_path)
    outputs.append(region_path)
    boundary_path = out_dir / "boundary.csv"
    region.boundary_to_csv(boundary_path)
    outputs.append(boundary_path)
    report_path = out_dir / "report.json"
    _write_json(
        report_path,
        {
            "n_cells": int(region.classes.size),
            "n_global": int(np.sum(region.classes == PointClass.GLOBAL)),
            "n_all_quench": int(np.sum(region.classes == PointClass.ALL_QUENCH)),
            "n_unresolved": region.n_unresolved,
        },
    )
    outputs.append(report_path)
    status = 3 if region.n_unresolved else 0
    return status, outputs


def _cmd_rates(config: RunConfig, out_dir: Path) -> tuple[int, list[Path]]:
    if config.rates_trajectory is None:
        raise ConfigurationError("rates subcommand requires rates.trajectory")
    trajectory = Trajectory.from_csv(config.rates_trajectory)
    if config.rates_t_est is not None:
        t_est = config.rates_t_est
    elif config.rates_report is not None:
        try:
            report = json.loads(Path(config.rates_report).read_text())
        except OSError as exc:
            raise ConfigurationError(f"cannot read rates.report: {exc}") from exc
        t_est = report.get("t_est")
        if t_est is None:
            raise ConfigurationError("rates.report carries no t_est (run did not quench?)")
    else:
        raise ConfigurationError("rates subcommand requires rates.t_est or rates.report")
    window = (config.rates_window_lo, config.rates_window_hi)
    fits = []
    for comp in ("u", "v"):
        try:
            fits.append(fit_rate(trajectory, t_est, comp, window))
        except InsufficientWindow:
            continue
    outputs = []
    fits_path = out_dir / "rates.csv"
    write_rate_fits_csv(fits_path, fits)
    outputs.append(fits_path)
    points_path = out_dir / "rate_points.csv"
    write_rate_points_csv(points_path, trajectory, t_est)
    outputs.append(points_path)
    return 0, outputs


def _cmd_shoot(config: RunConfig, out_dir: Path) -> tuple[int, list[Path]]:
    grid, op, params, solver = _build_problem(config)
    state0 = _initial_state(config, grid)
    shoot_config = ShootingConfig(
        params=params,
        u0_base=state0.u,
        v0_base=state0.v,
        delta_samples=config.shoot_delta_samples,
        bisect_steps=config.shoot_bisect_steps,
    )
    result = run_shooting(shoot_config, op, solver)
    outputs = []
    csv_path = out_dir / "shooting.csv"
    result.to_csv(csv_path)
    outputs.append(csv_path)
    report_path = out_dir / "report.json"
    _write_json(
        report_path,
        {
            "initial_bracket": list(result.initial_bracket),
            "bracket": list(result.bracket),
            "bracket_lo_regime": result.bracket_lo_record.regime.value,
            "bracket_hi_regime": result.bracket_hi_record.regime.value,
            "bracket_width": result.bracket[1] - result.bracket[0],
            "n_sweep": len(result.sweep),
            "n_bisect": len(result.bisect),
        },
    )
    outputs.append(report_path)
    return 0, outputs


_COMMANDS = {
    "simulate": _cmd_simulate,
    "stationary": _cmd_stationary,
    "region": _cmd_region,
    "rates": _cmd_rates,
    "shoot": _cmd_shoot,
}


def run_experiment(
    config: RunConfig, subcommand: str, out_dir: Path, seed: int | None = None
) -> int:
    if subcommand not in _COMMANDS:
        raise ConfigurationError(f"unknown subcommand '{subcommand}'")
    out_dir.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    status, outputs = _COMMANDS[subcommand](config, out_dir)
    wall = time.perf_counter() - start
    _write_manifest(out_dir, subcommand, config, outputs, wall, seed)
    return status


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="quenchlab",
        description="Nonlocal diffusion quenching experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("simulate", "integrate one configuration and report the outcome"),
        ("stationary", "solve for a stationary pair by Newton iteration"),
        ("region", "classify a (lambda, mu) lattice and bracket the boundary"),
        ("rates", "fit quenching-rate exponents from an existing trajectory CSV"),
        ("shoot", "sweep the delta family and bracket the simultaneous set"),
    ):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", required=True, help="path to the run configuration")
        sp.add_argument("--out", default="out", help="output directory (default: ./out)")
        sp.add_argument("--seed", type=int, default=None, help="recorded in the manifest")
    args = parser.parse_args(argv)
    try:
        config = parse_config(args.config)
        return run_experiment(config, args.command, Path(args.out), seed=args.seed)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except (NumericalFailure, NumericalOverflow) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except UnresolvedClassification as exc:
        print(f"unresolved classification: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
