"""Shared rendering for the two non-simultaneous quenching figures."""

from __future__ import annotations

import argparse
from pathlib import Path

from .common import (
    SchemaError,
    fail,
    load_rate_points,
    load_report,
    load_trajectory,
    new_figure,
    plot_min_evolution,
    plot_rate_panel,
    save,
    verify_reported_slopes,
)
from .figure2 import reference_slopes


def render(trajectory_path: Path, points_path: Path, report_path: Path, out_path: Path,
           title: str) -> None:
    trajectory = load_trajectory(trajectory_path)
    points = load_rate_points(points_path)
    report = load_report(report_path)
    verify_reported_slopes(points, report, tol=1e-6)
    fig, (left, right) = new_figure()
    plot_min_evolution(left, trajectory, "evolution of the minima")
    plot_rate_panel(right, points, reference_slopes(report), title)
    save(fig, out_path)


def run(argv: list[str] | None, title: str) -> int:
    parser = argparse.ArgumentParser(description=f"Render the {title} figure")
    parser.add_argument("--trajectory", required=True, type=Path)
    parser.add_argument("--rate-points", required=True, type=Path)
    parser.add_argument("--report", required=True, type=Path)
    parser.add_argument("--out", required=True, type=Path)
    args = parser.parse_args(argv)
    try:
        render(args.trajectory, args.rate_points, args.report, args.out, title)
    except SchemaError as exc:
        raise fail(str(exc))
    return 0
