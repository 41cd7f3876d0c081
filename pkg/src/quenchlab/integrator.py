"""Adaptive stiff integration with positivity guarding and quench/steady event handling.

The stepper is a linearly implicit Rosenbrock(2,3) pair (the classic ode23s
construction) driven by the analytic Jacobian from :mod:`quenchlab.model`.
Steps that produce a non-positive component are rejected and retried with half
the step size, so every accepted state is strictly positive. Near a quench the
step that first crosses the threshold is bisected so the final recorded
minimum lands inside [eps_q/2, eps_q].

A fixed-step classical fourth-order scheme (:func:`rk4_fixed_step`) is
provided as an independent reference path for cross-checking the adaptive one.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .grid_kernel import ConfigurationError, Grid, NonlocalOperator
from .model import (
    NumericalOverflow,
    State,
    SystemParams,
    psi_gap_uv,
    rhs_uv,
    singular_power,
)

# Fraction of the initial minimum below which a component counts as collapsed
# when the quench threshold itself is unreachable at machine resolution.
COLLAPSE_FRACTION = 1e-2

_ROS_D = 1.0 / (2.0 + math.sqrt(2.0))
_ROS_E32 = 6.0 + math.sqrt(2.0)


class NumericalFailure(ArithmeticError):
    """Step size underflowed while the solution was not quenching."""


@dataclass(frozen=True)
class SolverConfig:
    rtol: float = 1e-6
    atol: float = 1e-12
    dt_init: float = 1e-3
    dt_min: float = 1e-13
    dt_max: float = 10.0
    quench_threshold: float = 1e-6
    steady_tol: float = 1e-9
    t_max: float = 400.0
    record_stride: int = 1
    snapshot_times: tuple[float, ...] = ()
    max_steps: int = 1_000_000

    def __post_init__(self) -> None:
        if not (0 < self.dt_min < self.dt_max):
            raise ConfigurationError("require 0 < dt_min < dt_max")
        if self.quench_threshold <= 0 or self.steady_tol <= 0 or self.t_max <= 0:
            raise ConfigurationError("quench_threshold, steady_tol, t_max must be positive")
        if self.rtol <= 0 or self.atol < 0 or self.dt_init <= 0:
            raise ConfigurationError("tolerances and dt_init must be positive")
        if self.record_stride < 1:
            raise ConfigurationError("record_stride must be >= 1")
        if any(t <= 0 for t in self.snapshot_times):
            raise ConfigurationError("snapshot times must be positive")


@dataclass(frozen=True)
class Quenched:
    """A component minimum reached the quench threshold (or machine resolution)."""

    t_est: float
    u_quenched: bool
    v_quenched: bool
    t_final: float
    resolution_limited: bool = False

    @property
    def correction(self) -> float:
        return self.t_est - self.t_final


@dataclass(frozen=True)
class Steady:
    """The rhs residual dropped below steady_tol."""

    residual: float
    t_final: float


@dataclass(frozen=True)
class TimedOut:
    t_final: float


Outcome = Quenched | Steady | TimedOut


@dataclass
class Trajectory:
    """Per-step minimum tracking plus optional sparse full snapshots."""

    t: np.ndarray
    min_u: np.ndarray
    argmin_u: np.ndarray
    min_v: np.ndarray
    argmin_v: np.ndarray
    dt: np.ndarray
    psi_gap: np.ndarray
    max_u: np.ndarray | None = None
    max_v: np.ndarray | None = None
    snapshots: list[State] = field(default_factory=list)

    @property
    def floor_u(self) -> float:
        return float(np.min(self.min_u))

    @property
    def floor_v(self) -> float:
        return float(np.min(self.min_v))

    @property
    def psi_gap_max(self) -> float:
        return float(np.max(self.psi_gap))

    @property
    def final_state(self) -> State:
        if not self.snapshots:
            raise ValueError("trajectory carries no snapshots")
        return self.snapshots[-1]

    def to_csv(self, path: str | Path, grid: Grid) -> None:
        """Write samples as ``t,min_u,x_argmin_u,min_v,x_argmin_v,dt,psi_gap``."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "min_u", "x_argmin_u", "min_v", "x_argmin_v", "dt", "psi_gap"])
            for k in range(self.t.size):
                writer.writerow(
                    [
                        f"{self.t[k]:.17g}",
                        f"{self.min_u[k]:.17g}",
                        f"{grid.nodes[self.argmin_u[k]]:.17g}",
                        f"{self.min_v[k]:.17g}",
                        f"{grid.nodes[self.argmin_v[k]]:.17g}",
                        f"{self.dt[k]:.17g}",
                        f"{self.psi_gap[k]:.17g}",
                    ]
                )

    def snapshots_to_csv(self, path: str | Path, grid: Grid) -> None:
        """Write snapshots in long format ``t,x,u,v``."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "x", "u", "v"])
            for snap in self.snapshots:
                for x, u, v in zip(grid.nodes, snap.u, snap.v):
                    writer.writerow([f"{snap.t:.17g}", f"{x:.17g}", f"{u:.17g}", f"{v:.17g}"])

    @classmethod
    def from_csv(cls, path: str | Path, grid: Grid | None = None) -> "Trajectory":
        """Read a trajectory CSV back; argmin indices need the grid to be recovered."""
        rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if rows.shape[1] != 7:
            raise ConfigurationError(f"trajectory CSV {path} must have 7 columns")
        if grid is not None:
            idx_u = np.array([int(np.argmin(np.abs(grid.nodes - x))) for x in rows[:, 2]])
            idx_v = np.array([int(np.argmin(np.abs(grid.nodes - x))) for x in rows[:, 4]])
        else:
            idx_u = np.full(rows.shape[0], -1, dtype=int)
            idx_v = np.full(rows.shape[0], -1, dtype=int)
        return cls(
            t=rows[:, 0],
            min_u=rows[:, 1],
            argmin_u=idx_u,
            min_v=rows[:, 3],
            argmin_v=idx_v,
            dt=rows[:, 5],
            psi_gap=rows[:, 6],
        )


class _Recorder:
    def __init__(self, params: SystemParams, stride: int) -> None:
        self.params = params
        self.stride = stride
        self.rows: list[tuple[float, float, int, float, int, float, float, float, float]] = []
        self.snapshots: list[State] = []
        self._since_last = 0

    def sample(self, t: float, u: np.ndarray, v: np.ndarray, dt: float, force: bool = False) -> None:
        self._since_last += 1
        if not force and self._since_last < self.stride:
            return
        if self.rows and t == self.rows[-1][0]:  # forced re-sample of the same instant
            return
        self._since_last = 0
        iu = int(np.argmin(u))  # ties resolve to the smallest index
        iv = int(np.argmin(v))
        self.rows.append(
            (
                t,
                float(u[iu]),
                iu,
                float(v[iv]),
                iv,
                dt,
                psi_gap_uv(u, v, self.params),
                float(np.max(u)),
                float(np.max(v)),
            )
        )

    def snapshot(self, t: float, u: np.ndarray, v: np.ndarray) -> None:
        self.snapshots.append(State(t, u.copy(), v.copy()))

    def build(self) -> Trajectory:
        cols = list(zip(*self.rows))
        return Trajectory(
            t=np.asarray(cols[0]),
            min_u=np.asarray(cols[1]),
            argmin_u=np.asarray(cols[2], dtype=int),
            min_v=np.asarray(cols[3]),
            argmin_v=np.asarray(cols[4], dtype=int),
            dt=np.asarray(cols[5]),
            psi_gap=np.asarray(cols[6]),
            max_u=np.asarray(cols[7]),
            max_v=np.asarray(cols[8]),
            snapshots=self.snapshots,
        )


def component_collapsed(floor: float, initial_min: float, eps_q: float) -> bool:
    """Desk-scale test that a component's minimum collapsed toward zero.

    The hard criterion is floor <= eps_q. Rates with small exponents put the
    threshold below machine time resolution, so a floor under
    COLLAPSE_FRACTION of the initial minimum also counts.
    """
    return floor <= max(eps_q, COLLAPSE_FRACTION * initial_min)


def extrapolate_quench_time(t_final: float, m: float, dm_dt: float) -> float:
    """Linear extrapolation T = t_final + m / |m'| of a decaying minimum."""
    if abs(dm_dt) < 1e-14:
        warnings.warn("degenerate quench-time correction: |m'| < 1e-14", RuntimeWarning)
        return t_final
    return t_final + m / abs(dm_dt)


def estimate_T(
    trajectory: Trajectory,
    state_final: State,
    params: SystemParams,
    op: NonlocalOperator,
) -> float:
    """Quench-time estimate from the smaller final minimum and its rhs derivative."""
    del trajectory  # the estimate uses only the final state
    du, dv = rhs_uv(state_final.u, state_final.v, op, params)
    iu = int(np.argmin(state_final.u))
    iv = int(np.argmin(state_final.v))
    if state_final.u[iu] <= state_final.v[iv]:
        m, dm = float(state_final.u[iu]), float(du[iu])
    else:
        m, dm = float(state_final.v[iv]), float(dv[iv])
    return extrapolate_quench_time(state_final.t, m, dm)


def _step_ros23(
    y: np.ndarray,
    f0: np.ndarray,
    h: float,
    n: int,
    op: NonlocalOperator,
    params: SystemParams,
) -> tuple[np.ndarray, np.ndarray, np.ndarray] | None:
    """One Rosenbrock(2,3) attempt. Returns (y1, f_at_y1, error) or None when the
    step left the positive cone or overflowed."""
    hd = h * _ROS_D
    n2 = 2 * n
    w_mat = np.zeros((n2, n2))
    diffusion = -hd * op.weights
    idx = np.arange(n)
    diffusion[idx, idx] += 1.0 + hd
    w_mat[:n, :n] = diffusion
    w_mat[n:, n:] = diffusion
    u, v = y[:n], y[n:]
    w_mat[idx, n + idx] = -hd * params.lam * params.p * singular_power(v, params.p + 1.0)
    w_mat[n + idx, idx] = -hd * params.mu * params.q * singular_power(u, params.q + 1.0)
    try:
        lu = lu_factor(w_mat, check_finite=False)
        k1 = lu_solve(lu, f0, check_finite=False)
        y_half = y + 0.5 * h * k1
        if np.any(y_half <= 0.0):
            return None
        f1 = np.concatenate(rhs_uv(y_half[:n], y_half[n:], op, params))
        k2 = lu_solve(lu, f1 - k1, check_finite=False) + k1
        y1 = y + h * k2
        if np.any(y1 <= 0.0):
            return None
        f2 = np.concatenate(rhs_uv(y1[:n], y1[n:], op, params))
        k3 = lu_solve(lu, f2 - _ROS_E32 * (k2 - f1) - 2.0 * (k1 - f0), check_finite=False)
    except NumericalOverflow:
        return None
    err = (h / 6.0) * (k1 - 2.0 * k2 + k3)
    if not np.isfinite(err).all():
        return None
    return y1, f2, err


def integrate(
    state0: State,
    op: NonlocalOperator,
    params: SystemParams,
    config: SolverConfig,
) -> tuple[Trajectory, Outcome]:
    """Advance the semidiscrete system until quench, steady state, or t_max.

    Deterministic for fixed inputs. Raises NumericalFailure if the step size
    underflows while the minima are not decreasing.
    """
    if params.lam <= 0 or params.mu <= 0:
        raise ConfigurationError("time evolution requires lam > 0 and mu > 0")
    n = op.size
    if state0.u.shape != (n,) or state0.v.shape != (n,):
        raise ConfigurationError("initial state does not match the operator size")
    if np.any(state0.u <= 0) or np.any(state0.v <= 0):
        raise ConfigurationError("initial state must be strictly positive")

    eps_q = config.quench_threshold
    t = float(state0.t)
    t_max = t + config.t_max
    y = np.concatenate([state0.u, state0.v]).astype(float)
    rec = _Recorder(params, config.record_stride)
    rec.sample(t, y[:n], y[n:], 0.0, force=True)
    rec.snapshot(t, y[:n], y[n:])
    init_min_u = float(np.min(y[:n]))
    init_min_v = float(np.min(y[n:]))

    snaps = sorted(set(config.snapshot_times))
    snaps = [t + s for s in snaps if t + s < t_max]
    snap_idx = 0

    def finish_quenched(resolution_limited: bool) -> tuple[Trajectory, Outcome]:
        u_f, v_f = y[:n], y[n:]
        rec.sample(t, u_f, v_f, h_used, force=True)
        rec.snapshot(t, u_f, v_f)
        traj = rec.build()
        state_f = State(t, u_f.copy(), v_f.copy())
        t_est = estimate_T(traj, state_f, params, op)
        flag_u = traj.floor_u <= eps_q or component_collapsed(traj.floor_u, init_min_u, eps_q)
        flag_v = traj.floor_v <= eps_q or component_collapsed(traj.floor_v, init_min_v, eps_q)
        outcome = Quenched(
            t_est=t_est,
            u_quenched=flag_u,
            v_quenched=flag_v,
            t_final=t,
            resolution_limited=resolution_limited,
        )
        return traj, outcome

    f0 = np.concatenate(rhs_uv(y[:n], y[n:], op, params))
    if float(np.max(np.abs(f0))) < config.steady_tol:
        rec.snapshot(t, y[:n], y[n:])
        return rec.build(), Steady(residual=float(np.max(np.abs(f0))), t_final=t)
    if min(init_min_u, init_min_v) <= eps_q:
        h_used = 0.0
        return finish_quenched(resolution_limited=False)

    h = min(config.dt_init, config.dt_max, t_max - t)
    h_used = 0.0
    m_prev = min(init_min_u, init_min_v)

    for _ in range(config.max_steps):
        if t >= t_max - 1e-14 * max(1.0, abs(t_max)):
            rec.sample(t, y[:n], y[n:], h_used, force=True)
            rec.snapshot(t, y[:n], y[n:])
            return rec.build(), TimedOut(t_final=t)

        h = min(h, config.dt_max, t_max - t)
        if snap_idx < len(snaps):
            h = min(h, snaps[snap_idx] - t)
        h = max(h, config.dt_min)

        attempt = _step_ros23(y, f0, h, n, op, params)
        if attempt is None:
            # left positivity or overflowed: retry with half the step
            h *= 0.5
            if h < config.dt_min or t + h == t:
                if _minima_decreasing(m_prev, y, n, f0):
                    return finish_quenched(resolution_limited=True)
                raise NumericalFailure(f"step underflow at t={t!r} without decreasing minima")
            continue

        y1, f2, err = attempt
        scale = config.atol + config.rtol * np.maximum(np.abs(y), np.abs(y1))
        err_norm = float(np.max(np.abs(err) / scale))
        if err_norm > 1.0:
            h *= float(np.clip(0.9 * err_norm ** (-1.0 / 3.0), 0.1, 0.5))
            if h < config.dt_min or t + h == t:
                if _minima_decreasing(m_prev, y, n, f0):
                    return finish_quenched(resolution_limited=True)
                raise NumericalFailure(f"step underflow at t={t!r} without decreasing minima")
            continue

        m1 = float(min(np.min(y1[:n]), np.min(y1[n:])))
        if m1 <= eps_q:
            t_land, y_land = _localize_quench(y, f0, h, n, op, params, eps_q, t)
            m_prev = min(float(np.min(y[:n])), float(np.min(y[n:])))
            t, y = t_land, y_land
            h_used = h
            return finish_quenched(resolution_limited=False)

        t_new = t + h
        if t_new == t:  # time resolution exhausted while steps still pass error control
            if _minima_decreasing(m_prev, y, n, f0):
                return finish_quenched(resolution_limited=True)
            raise NumericalFailure(f"time stagnation at t={t!r} without decreasing minima")
        m_prev = min(float(np.min(y[:n])), float(np.min(y[n:])))
        t = t_new
        y = y1
        f0 = f2
        h_used = h
        rec.sample(t, y[:n], y[n:], h)

        if snap_idx < len(snaps) and abs(t - snaps[snap_idx]) <= 1e-12 * max(1.0, snaps[snap_idx]):
            rec.snapshot(t, y[:n], y[n:])
            snap_idx += 1

        residual = float(np.max(np.abs(f2)))
        if residual < config.steady_tol:
            rec.sample(t, y[:n], y[n:], h, force=True)
            rec.snapshot(t, y[:n], y[n:])
            return rec.build(), Steady(residual=residual, t_final=t)

        h *= float(np.clip(0.9 * max(err_norm, 1e-10) ** (-1.0 / 3.0), 0.2, 5.0))

    raise NumericalFailure(f"max_steps={config.max_steps} exhausted at t={t!r}")


def _minima_decreasing(m_prev: float, y: np.ndarray, n: int, f0: np.ndarray) -> bool:
    """Current overall minimum strictly below the previous one and still falling."""
    u, v = y[:n], y[n:]
    iu, iv = int(np.argmin(u)), int(np.argmin(v))
    if u[iu] <= v[iv]:
        m_now, slope = float(u[iu]), float(f0[iu])
    else:
        m_now, slope = float(v[iv]), float(f0[n + iv])
    return m_now < m_prev and slope < 0.0


def _localize_quench(
    y: np.ndarray,
    f0: np.ndarray,
    h: float,
    n: int,
    op: NonlocalOperator,
    params: SystemParams,
    eps_q: float,
    t: float,
) -> tuple[float, np.ndarray]:
    """Bisect the crossing step so the landed minimum sits in [eps_q/2, eps_q]."""

    def trial(theta: float) -> tuple[float, np.ndarray | None]:
        attempt = _step_ros23(y, f0, theta * h, n, op, params)
        if attempt is None:
            return -1.0, None
        y_t = attempt[0]
        return float(min(np.min(y_t[:n]), np.min(y_t[n:]))), y_t

    lo, hi = 0.0, 1.0
    m_hi, y_hi = trial(1.0)
    if y_hi is not None and eps_q / 2.0 <= m_hi <= eps_q:
        return t + h, y_hi
    best = (t + h, y_hi)
    for _ in range(64):
        theta = 0.5 * (lo + hi)
        m_t, y_t = trial(theta)
        if y_t is None or m_t < eps_q / 2.0:
            hi = theta
            if y_t is not None:
                best = (t + theta * h, y_t)
        elif m_t > eps_q:
            lo = theta
        else:
            return t + theta * h, y_t
        if hi - lo < 1e-14:
            break
    if best[1] is None:  # pathological: every trial left positivity
        raise NumericalFailure(f"quench localization failed at t={t!r}")
    return best


def rk4_fixed_step(
    state0: State,
    op: NonlocalOperator,
    params: SystemParams,
    dt: float,
    t_end: float,
) -> State:
    """Classical fixed-step fourth-order reference integration up to t_end."""
    if dt <= 0 or t_end <= state0.t:
        raise ConfigurationError("rk4 reference requires dt > 0 and t_end > t0")
    y = np.concatenate([state0.u, state0.v]).astype(float)
    n = op.size

    def f(z: np.ndarray) -> np.ndarray:
        return np.concatenate(rhs_uv(z[:n], z[n:], op, params))

    n_steps = int(round((t_end - state0.t) / dt))
    if abs(state0.t + n_steps * dt - t_end) > 1e-9 * max(1.0, abs(t_end)):
        raise ConfigurationError("t_end must be an integer multiple of dt")
    t = state0.t
    for _ in range(n_steps):
        k1 = f(y)
        k2 = f(y + 0.5 * dt * k1)
        k3 = f(y + 0.5 * dt * k2)
        k4 = f(y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if np.any(y <= 0):
            raise NumericalFailure("rk4 reference left the positive cone")
        t += dt
    return State(t, y[:n].copy(), y[n:].copy())
