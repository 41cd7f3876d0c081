"""Stationary solutions, parameter-point classification, and region mapping.

Classification ground truth is the evolution dichotomy from constant-ones
data: it either settles onto a stationary pair (from above) or quenches, and
in the second case every solution quenches. Newton is the accelerator and
cross-check; Newton divergence alone never certifies nonexistence.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

import numpy as np
from scipy.linalg import solve as dense_solve

from .grid_kernel import ConfigurationError, NonlocalOperator
from .integrator import Quenched, SolverConfig, Steady, TimedOut, integrate
from .model import NumericalOverflow, State, SystemParams, jacobian_uv, rhs_uv

NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 100
UPPER_BOUND_SLACK = 1e-12
T_MAX_ESCALATION = 4.0


class UnresolvedClassification(RuntimeError):
    """Integration timed out even after the t_max escalation."""


@dataclass(frozen=True)
class StationaryPair:
    """Nodal stationary pair with the sup-norm residual of the stationary equations."""

    w: np.ndarray
    z: np.ndarray
    residual: float

    def bound_margins(self, params: SystemParams) -> tuple[float, float, float, float]:
        """(w - mu^{1/q}, 1 - w, z - lam^{1/p}, 1 - z) worst-case margins."""
        w_lo = float(np.min(self.w) - params.mu ** (1.0 / params.q))
        w_hi = float(1.0 - np.max(self.w))
        z_lo = float(np.min(self.z) - params.lam ** (1.0 / params.p))
        z_hi = float(1.0 - np.max(self.z))
        return w_lo, w_hi, z_lo, z_hi


def _stationary_residual(
    w: np.ndarray, z: np.ndarray, op: NonlocalOperator, params: SystemParams
) -> np.ndarray:
    du, dv = rhs_uv(w, z, op, params)
    return np.concatenate([du, dv])


def solve_stationary_newton(
    op: NonlocalOperator,
    params: SystemParams,
    init: tuple[np.ndarray, np.ndarray] | None = None,
    tol: float = NEWTON_TOL,
    max_iter: int = NEWTON_MAX_ITER,
) -> StationaryPair | None:
    """Damped Newton iteration for the stationary equations.

    Returns None when the iteration loses positivity, stalls, or converges to
    an iterate violating the stationary bounds mu^{1/q} < w <= 1,
    lam^{1/p} < z <= 1.
    """
    n = op.size
    if init is None:
        w = np.ones(n)
        z = np.ones(n)
    else:
        w, z = init[0].astype(float).copy(), init[1].astype(float).copy()
        if np.any(w <= 0) or np.any(z <= 0):
            raise ConfigurationError("Newton initial guess must be strictly positive")
    y = np.concatenate([w, z])
    try:
        f = _stationary_residual(y[:n], y[n:], op, params)
    except NumericalOverflow:
        return None
    res = float(np.max(np.abs(f)))
    for _ in range(max_iter):
        if res <= tol:
            return _validated_pair(y[:n], y[n:], res, params)
        jac = jacobian_uv(y[:n], y[n:], op, params)
        try:
            step = dense_solve(jac, -f, check_finite=False)
        except np.linalg.LinAlgError:
            return None
        alpha = 1.0
        while True:
            cand = y + alpha * step
            if np.all(cand > 0):
                try:
                    f_cand = _stationary_residual(cand[:n], cand[n:], op, params)
                    res_cand = float(np.max(np.abs(f_cand)))
                except NumericalOverflow:
                    res_cand = np.inf
                if res_cand < res:
                    y, f, res = cand, f_cand, res_cand
                    break
            alpha *= 0.5
            if alpha < 2.0**-40:
                return None
    if res <= tol:
        return _validated_pair(y[:n], y[n:], res, params)
    return None


def _validated_pair(
    w: np.ndarray, z: np.ndarray, res: float, params: SystemParams
) -> StationaryPair | None:
    w_floor = params.mu ** (1.0 / params.q)
    z_floor = params.lam ** (1.0 / params.p)
    ok = (
        np.all(w > w_floor)
        and np.all(z > z_floor)
        and np.all(w <= 1.0 + UPPER_BOUND_SLACK)
        and np.all(z <= 1.0 + UPPER_BOUND_SLACK)
    )
    if not ok:
        return None
    return StationaryPair(w=w.copy(), z=z.copy(), residual=res)


class PointClass(str, Enum):
    GLOBAL = "global"
    ALL_QUENCH = "all_quench"
    UNRESOLVED = "unresolved"


@dataclass(frozen=True)
class PointResult:
    verdict: PointClass
    t_est: float | None
    state_final: State
    steady_residual: float | None


def classify_parameter_point(
    op: NonlocalOperator,
    p: float,
    q: float,
    lam: float,
    mu: float,
    config: SolverConfig,
) -> PointResult:
    """Evolve from constant-ones data and read off the dichotomy.

    Steady -> global solutions exist; Quenched -> every solution quenches.
    One t_max escalation (factor 4) is attempted before raising
    UnresolvedClassification.
    """
    if lam <= 0 or mu <= 0:
        raise ConfigurationError("classification requires lam > 0 and mu > 0")
    params = SystemParams(lam=lam, mu=mu, p=p, q=q)
    n = op.size
    state0 = State(0.0, np.ones(n), np.ones(n))
    traj, outcome = integrate(state0, op, params, config)
    if isinstance(outcome, TimedOut):
        resumed = replace(config, t_max=(T_MAX_ESCALATION - 1.0) * config.t_max)
        traj, outcome = integrate(traj.final_state, op, params, resumed)
    if isinstance(outcome, TimedOut):
        raise UnresolvedClassification(
            f"point (lam={lam:g}, mu={mu:g}) undecided after t={outcome.t_final:g}"
        )
    if isinstance(outcome, Steady):
        return PointResult(PointClass.GLOBAL, None, traj.final_state, outcome.residual)
    assert isinstance(outcome, Quenched)
    return PointResult(PointClass.ALL_QUENCH, outcome.t_est, traj.final_state, None)


@dataclass(frozen=True)
class BoundaryBracket:
    lam: float
    mu_star_lo: float
    mu_star_hi: float


@dataclass
class RegionMap:
    lambdas: np.ndarray
    mus: np.ndarray
    classes: np.ndarray  # (n_lambda, n_mu) of PointClass values
    t_est: np.ndarray    # np.nan where not applicable
    boundary: list[BoundaryBracket]

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["lambda", "mu", "class", "T_est"])
            for i, lam in enumerate(self.lambdas):
                for j, mu in enumerate(self.mus):
                    writer.writerow(
                        [
                            f"{lam:.17g}",
                            f"{mu:.17g}",
                            PointClass(self.classes[i, j]).value,
                            f"{self.t_est[i, j]:.17g}",
                        ]
                    )

    def boundary_to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["lambda", "mu_star_lo", "mu_star_hi"])
            for br in self.boundary:
                writer.writerow(
                    [f"{br.lam:.17g}", f"{br.mu_star_lo:.17g}", f"{br.mu_star_hi:.17g}"]
                )

    @property
    def n_unresolved(self) -> int:
        return int(np.sum(self.classes == PointClass.UNRESOLVED))


def _sample_axis(lo: float, hi: float, resolution: int) -> np.ndarray:
    # half-open range (lo, hi]: exclude lo (classification needs positive rates)
    return lo + (hi - lo) * np.arange(1, resolution + 1) / resolution


def map_region(
    op: NonlocalOperator,
    p: float,
    q: float,
    lambda_range: tuple[float, float],
    mu_range: tuple[float, float],
    resolution: int,
    config: SolverConfig,
    bisect_steps: int = 6,
    workers: int = 1,
) -> RegionMap:
    """Classify a (lambda, mu) lattice and bracket mu*_lambda along each column."""
    for name, (lo, hi) in (("lambda", lambda_range), ("mu", mu_range)):
        if not (0 <= lo < hi):
            raise ConfigurationError(f"invalid {name} range ({lo}, {hi})")
    if resolution < 2:
        raise ConfigurationError("region resolution must be >= 2")
    lambdas = _sample_axis(*lambda_range, resolution)
    mus = _sample_axis(*mu_range, resolution)

    def classify(lam: float, mu: float) -> tuple[PointClass, float]:
        try:
            result = classify_parameter_point(op, p, q, lam, mu, config)
        except UnresolvedClassification:
            return PointClass.UNRESOLVED, np.nan
        t_est = result.t_est if result.t_est is not None else np.nan
        return result.verdict, t_est

    cells = [(i, j) for i in range(resolution) for j in range(resolution)]
    classes = np.empty((resolution, resolution), dtype=object)
    t_est = np.full((resolution, resolution), np.nan)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(lambda ij: classify(lambdas[ij[0]], mus[ij[1]]), cells))
    else:
        outcomes = [classify(lambdas[i], mus[j]) for i, j in cells]
    for (i, j), (cls, te) in zip(cells, outcomes):
        classes[i, j] = cls
        t_est[i, j] = te

    boundary: list[BoundaryBracket] = []
    for i, lam in enumerate(lambdas):
        col = classes[i, :]
        global_js = [j for j in range(resolution) if col[j] == PointClass.GLOBAL]
        if global_js:
            lo_mu = float(mus[max(global_js)])
            quench_above = [j for j in range(resolution) if mus[j] > lo_mu and col[j] == PointClass.ALL_QUENCH]
            hi_mu = float(mus[min(quench_above)]) if quench_above else np.inf
        else:
            lo_mu = 0.0
            hi_mu = float(mus[0])
        if np.isfinite(hi_mu):
            for _ in range(bisect_steps):
                mid = 0.5 * (lo_mu + hi_mu)
                cls, _ = classify(lam, mid)
                if cls == PointClass.GLOBAL:
                    lo_mu = mid
                elif cls == PointClass.ALL_QUENCH:
                    hi_mu = mid
                else:
                    break
        boundary.append(BoundaryBracket(lam=float(lam), mu_star_lo=lo_mu, mu_star_hi=hi_mu))
    return RegionMap(lambdas=lambdas, mus=mus, classes=classes, t_est=t_est, boundary=boundary)


def check_staircase_monotonicity(region: RegionMap) -> list[tuple[int, int, int, int]]:
    """Violations of: (lam, mu) global implies every smaller sampled pair is global.

    Unresolved cells are wildcards. Returns [(i, j, i2, j2)] with (i2, j2) the
    offending non-global cell dominated by the global cell (i, j).
    """
    violations = []
    n_l, n_m = region.classes.shape
    for i in range(n_l):
        for j in range(n_m):
            if region.classes[i, j] != PointClass.GLOBAL:
                continue
            for i2 in range(i + 1):
                for j2 in range(j + 1):
                    if region.classes[i2, j2] == PointClass.ALL_QUENCH:
                        violations.append((i, j, i2, j2))
    return violations


@dataclass(frozen=True)
class MonotonicityVerdict:
    holds: bool
    violations: list[tuple[int, int, str, float]]


def check_stationary_monotonicity(
    pairs: list[tuple[SystemParams, StationaryPair]], slack: float = 1e-10
) -> MonotonicityVerdict:
    """Smaller parameters give larger stationary solutions, componentwise."""
    violations: list[tuple[int, int, str, float]] = []
    for a in range(len(pairs)):
        for b in range(len(pairs)):
            pa, sa = pairs[a]
            pb, sb = pairs[b]
            if a == b or not (pa.lam <= pb.lam and pa.mu <= pb.mu):
                continue
            w_gap = float(np.min(sa.w - sb.w))
            z_gap = float(np.min(sa.z - sb.z))
            if w_gap < -slack:
                violations.append((a, b, "w", w_gap))
            if z_gap < -slack:
                violations.append((a, b, "z", z_gap))
    return MonotonicityVerdict(holds=not violations, violations=violations)
