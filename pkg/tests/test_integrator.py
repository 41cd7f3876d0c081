from __future__ import annotations

import numpy as np
import pytest

from quenchlab.grid_kernel import ConfigurationError
from quenchlab.integrator import (
    NumericalFailure,
    Quenched,
    SolverConfig,
    Steady,
    TimedOut,
    Trajectory,
    estimate_T,
    extrapolate_quench_time,
    integrate,
    rk4_fixed_step,
)
from quenchlab.model import State, SystemParams, apriori_bounds, rhs

QUENCH_PARAMS = SystemParams(lam=0.1, mu=0.001, p=2.0, q=3.0)


def _ones(op):
    return State(0.0, np.ones(op.size), np.ones(op.size))


def _quench_solver(**overrides):
    base = dict(
        rtol=1e-6,
        atol=1e-12,
        dt_init=1e-3,
        dt_min=1e-14,
        dt_max=10.0,
        quench_threshold=1e-4,
        steady_tol=1e-10,
        t_max=100.0,
    )
    base.update(overrides)
    return SolverConfig(**base)


@pytest.fixture(scope="module")
def small_quench_run(op40):
    trajectory, outcome = integrate(_ones(op40), op40, QUENCH_PARAMS, _quench_solver())
    return trajectory, outcome


def test_solver_config_validation():
    with pytest.raises(ConfigurationError):
        SolverConfig(dt_min=1.0, dt_max=0.5)
    with pytest.raises(ConfigurationError):
        SolverConfig(quench_threshold=0.0)
    with pytest.raises(ConfigurationError):
        SolverConfig(record_stride=0)
    with pytest.raises(ConfigurationError):
        SolverConfig(snapshot_times=(0.0,))


def test_quench_run_basic_invariants(small_quench_run):
    trajectory, outcome = small_quench_run
    assert isinstance(outcome, Quenched)
    assert np.all(np.diff(trajectory.t) > 0)
    assert np.all(trajectory.min_u > 0) and np.all(trajectory.min_v > 0)
    assert outcome.u_quenched and outcome.v_quenched


def test_quench_event_lands_in_band(small_quench_run):
    trajectory, outcome = small_quench_run
    if not outcome.resolution_limited:
        final_min = min(trajectory.min_u[-1], trajectory.min_v[-1])
        assert 0.5e-4 <= final_min <= 1e-4


def test_estimate_T_exceeds_final_time(small_quench_run, op40):
    trajectory, outcome = small_quench_run
    again = estimate_T(trajectory, trajectory.final_state, QUENCH_PARAMS, op40)
    assert again == pytest.approx(outcome.t_est)
    assert outcome.t_est > outcome.t_final


def test_integration_is_deterministic(op40):
    t1, o1 = integrate(_ones(op40), op40, QUENCH_PARAMS, _quench_solver())
    t2, o2 = integrate(_ones(op40), op40, QUENCH_PARAMS, _quench_solver())
    assert o1 == o2
    assert np.array_equal(t1.t, t2.t)
    assert np.array_equal(t1.min_u, t2.min_u)
    assert np.array_equal(t1.min_v, t2.min_v)


def test_monotone_decrease_from_ones(small_quench_run):
    trajectory, _ = small_quench_run
    slack = 10.0 * 1e-6
    assert np.all(np.diff(trajectory.min_u) <= slack)
    assert np.all(np.diff(trajectory.min_v) <= slack)
    assert np.all(np.diff(trajectory.max_u) <= slack)
    assert np.all(np.diff(trajectory.max_v) <= slack)


def test_apriori_bounds_hold_along_trajectory(op16):
    rng = np.random.default_rng(3)
    u0 = rng.uniform(0.8, 3.0, op16.size)
    v0 = rng.uniform(0.8, 2.0, op16.size)
    bounds = apriori_bounds(u0, v0)
    params = SystemParams(lam=0.05, mu=0.05, p=2.0, q=2.0)
    solver = _quench_solver(t_max=3.0, quench_threshold=1e-6)
    trajectory, _ = integrate(State(0.0, u0, v0), op16, params, solver)
    assert np.all(trajectory.max_u <= bounds.m_u + 1e-9)
    assert np.all(trajectory.max_v <= bounds.n_v + 1e-9)


def test_steady_outcome_small_rates(op16):
    params = SystemParams(lam=1e-3, mu=1e-3, p=2.0, q=3.0)
    solver = _quench_solver(steady_tol=1e-10, dt_max=50.0, t_max=500.0)
    trajectory, outcome = integrate(_ones(op16), op16, params, solver)
    assert isinstance(outcome, Steady)
    assert outcome.residual < 1e-10
    du, dv = rhs(trajectory.final_state, op16, params)
    assert max(np.max(np.abs(du)), np.max(np.abs(dv))) < 1e-10


def test_timeout_lands_exactly(op16):
    solver = _quench_solver(t_max=0.25, steady_tol=1e-14)
    trajectory, outcome = integrate(_ones(op16), op16, QUENCH_PARAMS, solver)
    assert isinstance(outcome, TimedOut)
    assert trajectory.t[-1] == pytest.approx(0.25, abs=1e-12)


def test_snapshot_landing(op16):
    times = (0.05, 0.125, 0.2)
    solver = _quench_solver(t_max=0.25, steady_tol=1e-14, snapshot_times=times)
    trajectory, _ = integrate(_ones(op16), op16, QUENCH_PARAMS, solver)
    snap_times = [s.t for s in trajectory.snapshots]
    for want in times:
        assert any(abs(got - want) <= 1e-12 for got in snap_times)


def test_numerical_failure_when_not_quenching(op5):
    # unreachable tolerance wedges the very first step below dt_min
    solver = SolverConfig(
        rtol=1e-300,
        atol=0.0,
        dt_init=1e-4,
        dt_min=1e-8,
        dt_max=1.0,
        quench_threshold=1e-6,
        steady_tol=1e-16,
        t_max=1.0,
    )
    with pytest.raises(NumericalFailure):
        integrate(_ones(op5), op5, QUENCH_PARAMS, solver)


def test_time_evolution_requires_positive_rates(op5):
    params = SystemParams(lam=0.0, mu=0.1, p=2.0, q=2.0)
    with pytest.raises(ConfigurationError):
        integrate(_ones(op5), op5, params, _quench_solver())


def test_extrapolation_recovers_linear_decay_exactly():
    # m(t) = c * (T - t) stopped at m = eps: correction is exact
    c, t_quench, eps = 0.37, 4.2, 1e-6
    t_stop = t_quench - eps / c
    assert extrapolate_quench_time(t_stop, eps, -c) == pytest.approx(t_quench, abs=1e-12)


def test_extrapolation_power_law_overshoot_bound():
    # m(t) = (T - t)^alpha stopped at eps: T_est - T = (1/alpha - 1) * eps^(1/alpha)
    alpha, t_quench, eps = 0.2, 1.0, 1e-6
    remaining = eps ** (1.0 / alpha)
    t_stop = t_quench - remaining
    dm_dt = -alpha * remaining ** (alpha - 1.0)
    t_est = extrapolate_quench_time(t_stop, eps, dm_dt)
    assert abs(t_est - t_quench) <= 5.0 * eps ** (1.0 / alpha)
    assert t_est - t_quench == pytest.approx((1.0 / alpha - 1.0) * remaining, rel=1e-9)


def test_extrapolation_degenerate_slope_warns():
    with pytest.warns(RuntimeWarning):
        assert extrapolate_quench_time(3.0, 1e-6, 0.0) == 3.0


def test_adaptive_matches_rk4_reference_small(op16):
    solver = _quench_solver(rtol=1e-8, atol=1e-12, t_max=0.25, steady_tol=1e-14)
    trajectory, _ = integrate(_ones(op16), op16, QUENCH_PARAMS, solver)
    ref = rk4_fixed_step(_ones(op16), op16, QUENCH_PARAMS, 1e-4, 0.25)
    final = trajectory.final_state
    diff = max(np.max(np.abs(final.u - ref.u)), np.max(np.abs(final.v - ref.v)))
    assert diff <= 1e-6


def test_comparison_preservation_small(op16):
    rng = np.random.default_rng(5)
    params = SystemParams(lam=0.01, mu=0.01, p=2.0, q=3.0)
    times = (0.25, 0.5, 0.75, 1.0)
    solver = _quench_solver(t_max=1.0, steady_tol=1e-14, snapshot_times=times)
    for _ in range(3):
        hi_u = rng.uniform(0.9, 1.5, op16.size)
        hi_v = rng.uniform(0.9, 1.5, op16.size)
        lo_u = hi_u * rng.uniform(0.7, 1.0, op16.size)
        lo_v = hi_v * rng.uniform(0.7, 1.0, op16.size)
        traj_hi, _ = integrate(State(0.0, hi_u, hi_v), op16, params, solver)
        traj_lo, _ = integrate(State(0.0, lo_u, lo_v), op16, params, solver)
        slack = 10.0 * solver.rtol * 1.5
        for s_hi, s_lo in zip(traj_hi.snapshots, traj_lo.snapshots):
            assert s_hi.t == pytest.approx(s_lo.t, abs=1e-10)
            assert np.all(s_hi.u - s_lo.u >= -slack)
            assert np.all(s_hi.v - s_lo.v >= -slack)


def test_trajectory_csv_roundtrip(tmp_path, small_quench_run, op40):
    trajectory, _ = small_quench_run
    path = tmp_path / "trajectory.csv"
    trajectory.to_csv(path, op40.grid)
    back = Trajectory.from_csv(path, op40.grid)
    assert np.array_equal(back.t, trajectory.t)
    assert np.array_equal(back.min_u, trajectory.min_u)
    assert np.array_equal(back.min_v, trajectory.min_v)
    assert np.array_equal(back.argmin_u, trajectory.argmin_u)
    assert np.array_equal(back.psi_gap, trajectory.psi_gap)


def test_snapshots_csv(tmp_path, small_quench_run, op40):
    trajectory, _ = small_quench_run
    path = tmp_path / "snapshots.csv"
    trajectory.snapshots_to_csv(path, op40.grid)
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert data.shape[1] == 4
    assert data.shape[0] == len(trajectory.snapshots) * op40.size
