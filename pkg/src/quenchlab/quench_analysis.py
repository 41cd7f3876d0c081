"""Outcome classification, quench-rate fitting, and trajectory diagnostics.

Observed regimes are decided from recorded minimum floors. A component counts
as collapsed when its floor reaches the quench threshold or, for rates whose
threshold crossing sits below machine time resolution, when it falls under
COLLAPSE_FRACTION of its initial minimum. A component counts as surviving when
its floor stays a factor 10 above the collapse level.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .grid_kernel import ConfigurationError, Grid
from .integrator import COLLAPSE_FRACTION, Outcome, Quenched, Trajectory, component_collapsed
from .model import SystemParams, psi

# Fixed diagnostic band for the "bounded ratio" verdict; not a claim about the
# constants in the asymptotic relations.
RATIO_BAND = (1.0 / 50.0, 50.0)


class InsufficientWindow(ValueError):
    """Fewer than the required samples fall inside the fit window."""


class RelationNotApplicable(ValueError):
    """The component relation is undefined for this outcome (non-simultaneous run)."""


class Regime(str, Enum):
    SIMULTANEOUS = "simultaneous"
    NON_SIMULTANEOUS_U = "non_simultaneous_u"
    NON_SIMULTANEOUS_V = "non_simultaneous_v"
    EITHER = "either"
    UNDETERMINED = "undetermined"
    NOT_QUENCHED = "not_quenched"


def predict_regime(params: SystemParams) -> Regime:
    """Regime implied by the exponents alone."""
    if params.p >= 1.0 and params.q >= 1.0:
        return Regime.SIMULTANEOUS
    if params.p >= 1.0 > params.q:
        return Regime.NON_SIMULTANEOUS_U
    if params.q >= 1.0 > params.p:
        return Regime.NON_SIMULTANEOUS_V
    return Regime.EITHER


def classify_regime(trajectory: Trajectory, eps_q: float) -> Regime:
    """Observed regime from the recorded floors of both components."""
    init_u = float(trajectory.min_u[0])
    init_v = float(trajectory.min_v[0])
    floor_u, floor_v = trajectory.floor_u, trajectory.floor_v
    collapsed_u = component_collapsed(floor_u, init_u, eps_q)
    collapsed_v = component_collapsed(floor_v, init_v, eps_q)
    survives_u = floor_u >= 10.0 * max(eps_q, COLLAPSE_FRACTION * init_u)
    survives_v = floor_v >= 10.0 * max(eps_q, COLLAPSE_FRACTION * init_v)
    if collapsed_u and collapsed_v:
        return Regime.SIMULTANEOUS
    if collapsed_u and survives_v:
        return Regime.NON_SIMULTANEOUS_U
    if collapsed_v and survives_u:
        return Regime.NON_SIMULTANEOUS_V
    return Regime.UNDETERMINED


@dataclass(frozen=True)
class RateLaw:
    """min ~ (T-t)**power * |log(T-t)|**log_power for a quenching component."""

    quenches: bool
    power: float | None = None
    log_power: float | None = None

    @property
    def has_log_correction(self) -> bool:
        return self.log_power is not None


def theoretical_rates(params: SystemParams) -> tuple[RateLaw, RateLaw]:
    """Asymptotic decay laws of (min u, min v) near the quench time."""
    p, q = params.p, params.q
    if p >= 1.0 > q:
        return RateLaw(True, 1.0), RateLaw(False)
    if q >= 1.0 > p:
        return RateLaw(False), RateLaw(True, 1.0)
    if p == 1.0 and q == 1.0:
        s = params.lam + params.mu
        return RateLaw(True, params.lam / s), RateLaw(True, params.mu / s)
    if p > 1.0 and q == 1.0:
        return RateLaw(True, 1.0, -p / (1.0 - p)), RateLaw(True, 0.0, 1.0 / (1.0 - p))
    if q > 1.0 and p == 1.0:
        return RateLaw(True, 0.0, 1.0 / (1.0 - q)), RateLaw(True, 1.0, -q / (1.0 - q))
    # p, q > 1 and the simultaneous branch of p, q < 1 share the pure powers
    denom = p * q - 1.0
    return RateLaw(True, (p - 1.0) / denom), RateLaw(True, (q - 1.0) / denom)


@dataclass(frozen=True)
class RateFit:
    component: str
    slope: float
    intercept: float
    rms_residual: float
    n_samples: int
    window: tuple[float, float]
    slope_lo: float | None = None  # refit with T_est shifted down by the correction
    slope_hi: float | None = None  # refit with T_est shifted up


def _window_samples(
    trajectory: Trajectory, t_est: float, component: str, window: tuple[float, float]
) -> tuple[np.ndarray, np.ndarray]:
    if component == "u":
        m = trajectory.min_u
    elif component == "v":
        m = trajectory.min_v
    else:
        raise ConfigurationError(f"component must be 'u' or 'v', got {component!r}")
    lo, hi = window
    if not (0 < lo < hi):
        raise ConfigurationError(f"invalid fit window {window}")
    mask = (m >= lo) & (m <= hi) & (trajectory.t < t_est)
    return trajectory.t[mask], m[mask]


def fit_rate(
    trajectory: Trajectory,
    t_est: float,
    component: str,
    window: tuple[float, float] = (1e-5, 1e-2),
    t_correction: float = 0.0,
) -> RateFit:
    """Least-squares slope of log(min) against log(T_est - t) over the window."""
    t, m = _window_samples(trajectory, t_est, component, window)
    if t.size < 20:
        raise InsufficientWindow(
            f"only {t.size} samples with min_{component} in [{window[0]:g}, {window[1]:g}]"
        )

    def _fit(te: float) -> tuple[float, float, float]:
        x = np.log(te - t)
        y = np.log(m)
        slope, intercept = np.polyfit(x, y, 1)
        rms = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
        return float(slope), float(intercept), rms

    slope, intercept, rms = _fit(t_est)
    slope_lo = slope_hi = None
    if t_correction > 0.0:
        if t_est - t_correction > float(np.max(t)):
            slope_lo = _fit(t_est - t_correction)[0]
        slope_hi = _fit(t_est + t_correction)[0]
    return RateFit(component, slope, intercept, rms, int(t.size), window, slope_lo, slope_hi)


def fit_log_rate(
    trajectory: Trajectory,
    t_est: float,
    component: str,
    window: tuple[float, float],
) -> RateFit:
    """Slope of log(min) against log|log(T_est - t)| for pure-log decay regimes."""
    t, m = _window_samples(trajectory, t_est, component, window)
    if t.size < 20:
        raise InsufficientWindow(
            f"only {t.size} samples with min_{component} in [{window[0]:g}, {window[1]:g}]"
        )
    x = np.log(np.abs(np.log(t_est - t)))
    y = np.log(m)
    slope, intercept = np.polyfit(x, y, 1)
    rms = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return RateFit(component, float(slope), float(intercept), rms, int(t.size), window)


def detect_quench_set(
    trajectory: Trajectory, grid: Grid, cluster_radius: float
) -> np.ndarray:
    """Cluster the argmin abscissae recorded over the final decade of the collapse.

    A component participates when its floor fell below COLLAPSE_FRACTION of its
    initial minimum; its samples with min within 10x of its floor contribute.
    """
    if cluster_radius <= 0:
        raise ConfigurationError("cluster_radius must be positive")
    points: list[float] = []
    for m, idx in ((trajectory.min_u, trajectory.argmin_u), (trajectory.min_v, trajectory.argmin_v)):
        floor = float(np.min(m))
        if floor > COLLAPSE_FRACTION * float(m[0]):
            continue
        mask = m <= 10.0 * floor
        points.extend(grid.nodes[idx[mask]].tolist())
    if not points:
        return np.array([])
    points.sort()
    clusters: list[list[float]] = [[points[0]]]
    for x in points[1:]:
        if x - clusters[-1][-1] <= cluster_radius:
            clusters[-1].append(x)
        else:
            clusters.append([x])
    reps = []
    for cluster in clusters:
        vals, counts = np.unique(cluster, return_counts=True)
        reps.append(float(vals[np.argmax(counts)]))  # modal abscissa; ties -> smallest
    return np.asarray(reps)


@dataclass(frozen=True)
class RelationCheck:
    """Ratio of the weighted primitives mu*psi_q[min u] / (lam*psi_p[min v])."""

    ratios: np.ndarray
    band: tuple[float, float]
    bounded: bool


def check_component_relation(trajectory: Trajectory, params: SystemParams) -> RelationCheck:
    """Track the weighted-primitive ratio over the final decade of the collapse.

    The difference mu*psi_q[u] - lam*psi_p[v] is bounded along trajectories, so
    for simultaneous quenching the ratio of the two (diverging, or jointly
    vanishing when p,q < 1) primitives tends to 1.
    """
    init_u, init_v = float(trajectory.min_u[0]), float(trajectory.min_v[0])
    floor_u, floor_v = trajectory.floor_u, trajectory.floor_v
    if floor_u > COLLAPSE_FRACTION * init_u or floor_v > COLLAPSE_FRACTION * init_v:
        raise RelationNotApplicable("component relation requires simultaneous quenching")
    overall = np.minimum(trajectory.min_u, trajectory.min_v)
    mask = overall <= 10.0 * float(np.min(overall))
    if params.p < 1.0 and params.q < 1.0:
        # rates for p,q < 1 assume both minima sit at a common point
        if np.any(trajectory.argmin_u[mask] != trajectory.argmin_v[mask]):
            raise RelationNotApplicable("minima do not share a common argmin")
    num = params.mu * np.asarray(psi(params.q, trajectory.min_u[mask]))
    den = params.lam * np.asarray(psi(params.p, trajectory.min_v[mask]))
    ratios = num / den
    bounded = bool(np.all((ratios >= RATIO_BAND[0]) & (ratios <= RATIO_BAND[1])))
    return RelationCheck(ratios=ratios, band=RATIO_BAND, bounded=bounded)


@dataclass
class QuenchReport:
    """Flat summary of one run: outcome, regimes, rates, quench set, diagnostics."""

    outcome: Outcome
    regime_predicted: Regime
    regime_observed: Regime
    t_est: float | None
    alpha_u: float | None
    alpha_v: float | None
    log_correction_u: bool
    log_correction_v: bool
    fit_u: RateFit | None
    fit_v: RateFit | None
    quench_set: list[float] | None
    psi_gap_max: float
    psi_gap_initial: float
    floor_u: float
    floor_v: float
    theoretical_u: RateLaw
    theoretical_v: RateLaw

    def to_dict(self) -> dict:
        def fit_dict(fit: RateFit | None) -> dict | None:
            if fit is None:
                return None
            return {
                "component": fit.component,
                "slope": fit.slope,
                "intercept": fit.intercept,
                "rms_residual": fit.rms_residual,
                "n_samples": fit.n_samples,
                "window_lo": fit.window[0],
                "window_hi": fit.window[1],
                "slope_lo": fit.slope_lo,
                "slope_hi": fit.slope_hi,
            }

        def law_dict(law: RateLaw) -> dict:
            return {"quenches": law.quenches, "power": law.power, "log_power": law.log_power}

        out: dict = {
            "outcome": type(self.outcome).__name__.lower(),
            "regime_predicted": self.regime_predicted.value,
            "regime_observed": self.regime_observed.value,
            "t_est": self.t_est,
            "alpha_u": self.alpha_u,
            "alpha_v": self.alpha_v,
            "log_correction_u": self.log_correction_u,
            "log_correction_v": self.log_correction_v,
            "fit_u": fit_dict(self.fit_u),
            "fit_v": fit_dict(self.fit_v),
            "quench_set": self.quench_set,
            "psi_gap_max": self.psi_gap_max,
            "psi_gap_initial": self.psi_gap_initial,
            "floor_u": self.floor_u,
            "floor_v": self.floor_v,
            "theoretical_u": law_dict(self.theoretical_u),
            "theoretical_v": law_dict(self.theoretical_v),
        }
        if isinstance(self.outcome, Quenched):
            out["u_quenched"] = self.outcome.u_quenched
            out["v_quenched"] = self.outcome.v_quenched
            out["resolution_limited"] = self.outcome.resolution_limited
            out["t_final"] = self.outcome.t_final
            out["correction"] = self.outcome.correction
        else:
            out["t_final"] = getattr(self.outcome, "t_final", None)
            out["residual"] = getattr(self.outcome, "residual", None)
        return out


def build_report(
    trajectory: Trajectory,
    outcome: Outcome,
    grid: Grid,
    params: SystemParams,
    eps_q: float,
    window: tuple[float, float] = (1e-5, 1e-2),
    cluster_radius: float | None = None,
) -> QuenchReport:
    """Assemble the post-run report; rate fits are omitted where the window is thin."""
    law_u, law_v = theoretical_rates(params)
    predicted = predict_regime(params)
    quenched = isinstance(outcome, Quenched)
    observed = classify_regime(trajectory, eps_q) if quenched else Regime.NOT_QUENCHED
    t_est = outcome.t_est if quenched else None
    fit_u = fit_v = None
    qset: list[float] | None = None
    if quenched:
        correction = outcome.correction
        for comp, law in (("u", law_u), ("v", law_v)):
            if not law.quenches:
                continue
            try:
                fit = fit_rate(trajectory, t_est, comp, window, t_correction=correction)
            except InsufficientWindow:
                fit = None
            if comp == "u":
                fit_u = fit
            else:
                fit_v = fit
        radius = cluster_radius if cluster_radius is not None else 3.0 * grid.h
        qset = [float(x) for x in detect_quench_set(trajectory, grid, radius)]
    return QuenchReport(
        outcome=outcome,
        regime_predicted=predicted,
        regime_observed=observed,
        t_est=t_est,
        alpha_u=fit_u.slope if fit_u else None,
        alpha_v=fit_v.slope if fit_v else None,
        log_correction_u=law_u.has_log_correction,
        log_correction_v=law_v.has_log_correction,
        fit_u=fit_u,
        fit_v=fit_v,
        quench_set=qset,
        psi_gap_max=trajectory.psi_gap_max,
        psi_gap_initial=float(trajectory.psi_gap[0]),
        floor_u=trajectory.floor_u,
        floor_v=trajectory.floor_v,
        theoretical_u=law_u,
        theoretical_v=law_v,
    )


def rate_points(
    trajectory: Trajectory, t_est: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(log(T_est - t), log(min u), log(min v)) for all samples strictly before T_est."""
    mask = (trajectory.t < t_est) & (trajectory.min_u > 0) & (trajectory.min_v > 0)
    return (
        np.log(t_est - trajectory.t[mask]),
        np.log(trajectory.min_u[mask]),
        np.log(trajectory.min_v[mask]),
    )


def write_rate_points_csv(path: str | Path, trajectory: Trajectory, t_est: float) -> None:
    log_s, log_u, log_v = rate_points(trajectory, t_est)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["log_T_minus_t", "log_min_u", "log_min_v"])
        for row in zip(log_s, log_u, log_v):
            writer.writerow([f"{val:.17g}" for val in row])


def write_rate_fits_csv(path: str | Path, fits: list[RateFit]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "component",
                "slope",
                "intercept",
                "rms_residual",
                "n_samples",
                "window_lo",
                "window_hi",
                "slope_lo",
                "slope_hi",
            ]
        )
        for fit in fits:
            writer.writerow(
                [
                    fit.component,
                    f"{fit.slope:.17g}",
                    f"{fit.intercept:.17g}",
                    f"{fit.rms_residual:.17g}",
                    fit.n_samples,
                    f"{fit.window[0]:.17g}",
                    f"{fit.window[1]:.17g}",
                    "" if fit.slope_lo is None else f"{fit.slope_lo:.17g}",
                    "" if fit.slope_hi is None else f"{fit.slope_hi:.17g}",
                ]
            )


def slope_band_check(slope: float, target: float, tol: float) -> bool:
    return math.isfinite(slope) and abs(slope - target) <= tol
