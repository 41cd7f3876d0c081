"""Figure 1: stabilizing profiles (left) versus a quenching minimum (right).

Left panel: solution profiles of the small-rate run at its recorded snapshot
times, settling onto the stationary pair. Right panel: minimum evolution of
the quenching run, both components collapsing in finite time.
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from .common import (
    SchemaError,
    U_COLOR,
    V_COLOR,
    fail,
    load_snapshots,
    load_trajectory,
    new_figure,
    plot_min_evolution,
    save,
)


def render(steady_snapshots: Path, quench_trajectory: Path, out_path: Path) -> None:
    snaps = load_snapshots(steady_snapshots)
    trajectory = load_trajectory(quench_trajectory)
    fig, (left, right) = new_figure()
    times = np.unique(snaps["t"])
    shades = np.linspace(0.35, 1.0, times.size)
    for t_val, shade in zip(times, shades):
        mask = snaps["t"] == t_val
        left.plot(snaps["x"][mask], snaps["u"][mask], color=U_COLOR, alpha=shade, lw=1.2)
        left.plot(snaps["x"][mask], snaps["v"][mask], color=V_COLOR, alpha=shade, lw=1.2)
    left.set_xlabel("x")
    left.set_ylabel("profiles")
    left.set_title("stabilization toward the stationary pair")
    plot_min_evolution(right, trajectory, "quenching run")
    save(fig, out_path)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--steady-snapshots", required=True, type=Path)
    parser.add_argument("--quench-trajectory", required=True, type=Path)
    parser.add_argument("--out", required=True, type=Path)
    args = parser.parse_args(argv)
    try:
        render(args.steady_snapshots, args.quench_trajectory, args.out)
    except SchemaError as exc:
        raise fail(str(exc))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
