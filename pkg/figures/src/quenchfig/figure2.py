"""Figure 2: simultaneous quenching evolution (left) and its log-log rates (right).

The right panel overlays dashed reference lines at the theoretical slopes and
re-fits both components from the rate-point CSV over the report's windows;
any disagreement with the reported slopes beyond 1e-6 aborts the render.
"""

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


def reference_slopes(report: dict) -> dict[str, float]:
    slopes = {}
    for component in ("u", "v"):
        law = report.get(f"theoretical_{component}") or {}
        if law.get("quenches") and law.get("power") is not None and not law.get("log_power"):
            slopes[component] = float(law["power"])
    return slopes


def render(trajectory_path: Path, points_path: Path, report_path: Path, out_path: Path) -> None:
    trajectory = load_trajectory(trajectory_path)
    points = load_rate_points(points_path)
    report = load_report(report_path)
    verify_reported_slopes(points, report, tol=1e-6)
    fig, (left, right) = new_figure()
    plot_min_evolution(left, trajectory, "evolution of the minima")
    plot_rate_panel(right, points, reference_slopes(report), "simultaneous quenching rate")
    save(fig, out_path)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trajectory", required=True, type=Path)
    parser.add_argument("--rate-points", required=True, type=Path)
    parser.add_argument("--report", required=True, type=Path)
    parser.add_argument("--out", required=True, type=Path)
    args = parser.parse_args(argv)
    try:
        render(args.trajectory, args.rate_points, args.report, args.out)
    except SchemaError as exc:
        raise fail(str(exc))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
