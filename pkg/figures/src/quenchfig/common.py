"""Shared CSV loading, schema validation, and deterministic figure setup.

Column layouts are pinned by the simulation package's external interfaces:
trajectory ``t,min_u,x_argmin_u,min_v,x_argmin_v,dt,psi_gap``, snapshots
``t,x,u,v``, rate points ``log_T_minus_t,log_min_u,log_min_v``.
"""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "quenchfig"

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

U_COLOR = "tab:blue"   # u component is drawn in blue throughout
V_COLOR = "tab:red"    # v component in red

TRAJECTORY_COLUMNS = ["t", "min_u", "x_argmin_u", "min_v", "x_argmin_v", "dt", "psi_gap"]
SNAPSHOT_COLUMNS = ["t", "x", "u", "v"]
RATE_COLUMNS = ["log_T_minus_t", "log_min_u", "log_min_v"]


class SchemaError(ValueError):
    """A CSV is missing, empty, or its header does not match the contract."""


def fail(message: str) -> "SystemExit":
    print(f"figure error: {message}", file=sys.stderr)
    return SystemExit(1)


def load_columns(path: str | Path, expected: list[str]) -> dict[str, np.ndarray]:
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"{path}: file not found")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        for column in expected:
            if column not in header:
                raise SchemaError(f"{path}: missing column '{column}'")
        rows = [row for row in reader if row]
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    data = np.array(rows, dtype=float)
    index = {name: header.index(name) for name in expected}
    return {name: data[:, index[name]] for name in expected}


def load_trajectory(path: str | Path) -> dict[str, np.ndarray]:
    return load_columns(path, TRAJECTORY_COLUMNS)


def load_snapshots(path: str | Path) -> dict[str, np.ndarray]:
    return load_columns(path, SNAPSHOT_COLUMNS)


def load_rate_points(path: str | Path) -> dict[str, np.ndarray]:
    return load_columns(path, RATE_COLUMNS)


def load_report(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"{path}: file not found")
    return json.loads(path.read_text())


def recompute_slope(points: dict[str, np.ndarray], component: str, fit: dict) -> float:
    """Least-squares slope over the report's fit window, from the CSV points.

    Reproduces the reported fit exactly: same sample selection (window on the
    minimum value), same abscissa log(T_est - t), same least-squares call.
    """
    log_m = points[f"log_min_{component}"]
    log_s = points["log_T_minus_t"]
    lo, hi = np.log(fit["window_lo"]), np.log(fit["window_hi"])
    mask = (log_m >= lo) & (log_m <= hi)
    if mask.sum() < 2:
        raise SchemaError(f"too few rate points inside the {component} fit window")
    slope = np.polyfit(log_s[mask], log_m[mask], 1)[0]
    return float(slope)


def verify_reported_slopes(points: dict[str, np.ndarray], report: dict, tol: float = 1e-6) -> dict:
    """Check the report's fitted slopes against a recomputation from the CSV."""
    recomputed = {}
    for component in ("u", "v"):
        fit = report.get(f"fit_{component}")
        if fit is None:
            continue
        slope = recompute_slope(points, component, fit)
        if abs(slope - fit["slope"]) > tol:
            raise SchemaError(
                f"recomputed {component}-slope {slope:.8f} disagrees with the "
                f"reported {fit['slope']:.8f} beyond {tol}"
            )
        recomputed[component] = slope
    return recomputed


def new_figure(width: float = 9.6, height: float = 3.6):
    return plt.subplots(1, 2, figsize=(width, height), constrained_layout=True)


def save(fig, out_path: str | Path) -> None:
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_min_evolution(ax, trajectory: dict[str, np.ndarray], title: str) -> None:
    ax.plot(trajectory["t"], trajectory["min_u"], color=U_COLOR, label="u")
    ax.plot(trajectory["t"], trajectory["min_v"], color=V_COLOR, label="v")
    ax.set_xlabel("t")
    ax.set_ylabel("minimum value")
    ax.set_title(title)
    ax.legend()


def plot_rate_panel(
    ax,
    points: dict[str, np.ndarray],
    slopes: dict[str, float],
    title: str,
) -> None:
    """-log(min) against -log(T - t) with dashed reference lines."""
    x = -points["log_T_minus_t"]
    order = np.argsort(x)
    x = x[order]
    for component, color in (("u", U_COLOR), ("v", V_COLOR)):
        y = -points[f"log_min_{component}"][order]
        ax.plot(x, y, color=color, label=component)
        slope = slopes.get(component)
        if slope is not None:
            anchor = y[-1] - slope * x[-1]
            ax.plot(x, slope * x + anchor, color=color, linestyle="--", linewidth=1.0,
                    label=f"slope {slope:g}")
    ax.set_xlabel("-log(T - t)")
    ax.set_ylabel("-log(min)")
    ax.set_title(title)
    ax.legend()
