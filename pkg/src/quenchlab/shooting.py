"""Shooting experiment over the initial-data family (delta*u0, (1-delta)*v0), p,q < 1.

Every admissible run quenches in finite time; sweeping delta exhibits both
non-simultaneous regimes, and bisection shrinks a bracket around the
simultaneous set between them. Probes are assigned to a side by which
component leads the collapse (sign of floor_u - floor_v): near the
simultaneous set both floors reach the threshold and regime labels alone
cannot split the interval, while the leading-component sign still can.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid_kernel import ConfigurationError, NonlocalOperator
from .integrator import NumericalFailure, Quenched, SolverConfig, Trajectory, integrate
from .model import State, SystemParams
from .quench_analysis import Regime, classify_regime


class SweepTooCoarse(RuntimeError):
    """The sweep found no sample on one of the non-simultaneous sides."""


@dataclass(frozen=True)
class ShootingConfig:
    params: SystemParams
    u0_base: np.ndarray
    v0_base: np.ndarray
    delta_samples: int = 33
    bisect_steps: int = 20

    def __post_init__(self) -> None:
        p, q = self.params.p, self.params.q
        if not (p < 1.0 and q < 1.0):
            raise ConfigurationError("shooting requires p < 1 and q < 1")
        if np.any(self.u0_base <= 0) or np.any(self.v0_base <= 0):
            raise ConfigurationError("base data must be strictly positive")
        u_cap = min(1.0, (self.params.mu / 2.0) ** (1.0 / q))
        v_cap = min(1.0, (self.params.lam / 2.0) ** (1.0 / p))
        if float(np.max(self.u0_base)) > u_cap or float(np.max(self.v0_base)) > v_cap:
            raise ConfigurationError(
                "base data violate the guaranteed-quenching ceilings "
                f"max u0 <= {u_cap:g}, max v0 <= {v_cap:g}"
            )
        if self.delta_samples < 3:
            raise ConfigurationError("delta_samples must be >= 3")
        if self.bisect_steps < 0:
            raise ConfigurationError("bisect_steps must be >= 0")


@dataclass(frozen=True)
class DeltaRecord:
    delta: float
    regime: Regime
    t_delta: float
    floor_u: float
    floor_v: float
    phase: str  # "sweep" or "bisect"

    @property
    def u_leads(self) -> bool:
        """True when u is the leading (deeper) component: the A- side."""
        return self.floor_u < self.floor_v


@dataclass
class ShootingResult:
    sweep: list[DeltaRecord]
    bisect: list[DeltaRecord]
    initial_bracket: tuple[float, float]
    bracket: tuple[float, float]
    bracket_lo_record: DeltaRecord
    bracket_hi_record: DeltaRecord

    @property
    def records(self) -> list[DeltaRecord]:
        return sorted(self.sweep + self.bisect, key=lambda r: (r.delta, r.phase))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["delta", "regime", "T_delta", "floor_u", "floor_v"])
            for rec in self.records:
                writer.writerow(
                    [
                        f"{rec.delta:.17g}",
                        rec.regime.value,
                        f"{rec.t_delta:.17g}",
                        f"{rec.floor_u:.17g}",
                        f"{rec.floor_v:.17g}",
                    ]
                )


def tdelta_bound(config: ShootingConfig, delta: float) -> float:
    """Guaranteed quench-time ceiling min(min delta*u0, min (1-delta)*v0)."""
    return float(
        min(delta * np.min(config.u0_base), (1.0 - delta) * np.min(config.v0_base))
    )


def run_delta(
    config: ShootingConfig,
    op: NonlocalOperator,
    solver: SolverConfig,
    delta: float,
    phase: str = "sweep",
) -> tuple[DeltaRecord, Trajectory]:
    """Integrate one member of the delta family and classify it."""
    if not (0.0 < delta < 1.0):
        raise ConfigurationError(f"delta must lie in (0, 1), got {delta}")
    state0 = State(0.0, delta * config.u0_base, (1.0 - delta) * config.v0_base)
    traj, outcome = integrate(state0, op, config.params, solver)
    if not isinstance(outcome, Quenched):
        raise NumericalFailure(
            f"delta={delta:g} did not quench ({type(outcome).__name__}); "
            "the admissibility ceilings guarantee quenching"
        )
    record = DeltaRecord(
        delta=delta,
        regime=classify_regime(traj, solver.quench_threshold),
        t_delta=outcome.t_est,
        floor_u=traj.floor_u,
        floor_v=traj.floor_v,
        phase=phase,
    )
    return record, traj


def run_shooting(
    config: ShootingConfig, op: NonlocalOperator, solver: SolverConfig
) -> ShootingResult:
    """Uniform delta sweep followed by bisection toward the simultaneous set."""
    n = config.delta_samples
    deltas = [(k + 1) / (n + 1) for k in range(n)]
    sweep = [run_delta(config, op, solver, d)[0] for d in deltas]

    lo_candidates = [r for r in sweep if r.regime == Regime.NON_SIMULTANEOUS_U]
    hi_candidates = [r for r in sweep if r.regime == Regime.NON_SIMULTANEOUS_V]
    if not lo_candidates or not hi_candidates:
        raise SweepTooCoarse(
            "sweep found no sample in "
            + ("A- " if not lo_candidates else "")
            + ("A+" if not hi_candidates else "")
            + "; widen the delta range toward 0/1 or refine the sweep"
        )
    lo_rec = max(lo_candidates, key=lambda r: r.delta)
    hi_rec = min(hi_candidates, key=lambda r: r.delta)
    if not lo_rec.delta < hi_rec.delta:
        raise SweepTooCoarse("non-simultaneous samples are not ordered; refine the sweep")
    lo, hi = lo_rec.delta, hi_rec.delta
    initial = (lo, hi)

    bisect: list[DeltaRecord] = []
    for _ in range(config.bisect_steps):
        mid = 0.5 * (lo + hi)
        rec, _ = run_delta(config, op, solver, mid, phase="bisect")
        bisect.append(rec)
        if rec.u_leads:
            lo, lo_rec = mid, rec
        else:
            hi, hi_rec = mid, rec
    return ShootingResult(
        sweep=sweep,
        bisect=bisect,
        initial_bracket=initial,
        bracket=(lo, hi),
        bracket_lo_record=lo_rec,
        bracket_hi_record=hi_rec,
    )


@dataclass(frozen=True)
class ContinuityDiagnostic:
    max_jump: float
    spacing: float
    refined_max_jump: float | None
    verdict: str  # "consistent" | "inconsistent" | "single-sweep"


def check_Tdelta_continuity(
    results: ShootingResult, refined: ShootingResult | None = None
) -> ContinuityDiagnostic:
    """Modulus-of-continuity diagnostic of T_delta over adjacent sweep samples."""
    recs = sorted(results.sweep, key=lambda r: r.delta)
    if len(recs) < 10:
        raise ConfigurationError("continuity diagnostic needs at least 10 sweep samples")
    ts = np.array([r.t_delta for r in recs])
    ds = np.array([r.delta for r in recs])
    max_jump = float(np.max(np.abs(np.diff(ts))))
    spacing = float(np.max(np.diff(ds)))
    if refined is None:
        return ContinuityDiagnostic(max_jump, spacing, None, "single-sweep")
    fine = sorted(refined.sweep, key=lambda r: r.delta)
    fine_jump = float(np.max(np.abs(np.diff([r.t_delta for r in fine]))))
    verdict = "consistent" if fine_jump < max_jump else "inconsistent"
    return ContinuityDiagnostic(max_jump, spacing, fine_jump, verdict)
