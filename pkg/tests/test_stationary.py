from __future__ import annotations

import numpy as np
import pytest

from quenchlab.grid_kernel import build_grid, build_operator, kernel_from_name
from quenchlab.integrator import SolverConfig
from quenchlab.model import SystemParams
from quenchlab.stationary import (
    PointClass,
    UnresolvedClassification,
    check_staircase_monotonicity,
    check_stationary_monotonicity,
    classify_parameter_point,
    map_region,
    solve_stationary_newton,
)


@pytest.fixture(scope="module")
def op_small():
    return build_operator(build_grid(-2.0, 2.0, 12), kernel_from_name("epanechnikov"))


def _solver(**overrides):
    base = dict(
        rtol=1e-6,
        atol=1e-12,
        dt_init=1e-3,
        dt_min=1e-14,
        dt_max=50.0,
        quench_threshold=1e-4,
        steady_tol=1e-11,
        t_max=500.0,
    )
    base.update(overrides)
    return SolverConfig(**base)


def test_zero_rates_give_constant_ones(op_small):
    params = SystemParams(lam=0.0, mu=0.0, p=2.0, q=3.0)
    pair = solve_stationary_newton(op_small, params)
    assert pair is not None
    assert np.array_equal(pair.w, np.ones(op_small.size))
    assert np.array_equal(pair.z, np.ones(op_small.size))
    assert pair.residual <= 1e-15  # ones is stationary to rounding; Newton takes no step


def test_newton_agrees_with_evolution_limit(op_small):
    params = SystemParams(lam=1e-3, mu=1e-3, p=2.0, q=3.0)
    pair = solve_stationary_newton(op_small, params)
    assert pair is not None
    result = classify_parameter_point(op_small, 2.0, 3.0, 1e-3, 1e-3, _solver())
    assert result.verdict == PointClass.GLOBAL
    assert np.max(np.abs(pair.w - result.state_final.u)) <= 1e-8
    assert np.max(np.abs(pair.z - result.state_final.v)) <= 1e-8


def test_large_lambda_has_no_stationary_solution(op_small):
    pair = solve_stationary_newton(op_small, SystemParams(lam=1.0, mu=0.1, p=2.0, q=2.0))
    assert pair is None


def test_stationary_bounds_strict(op_small):
    params = SystemParams(lam=2e-3, mu=1e-3, p=2.0, q=3.0)
    pair = solve_stationary_newton(op_small, params)
    assert pair is not None
    w_lo, w_hi, z_lo, z_hi = pair.bound_margins(params)
    assert w_lo > 0 and z_lo > 0
    assert w_hi >= -1e-12 and z_hi >= -1e-12


def test_stationary_monotonicity_in_parameters(op_small):
    grids = [
        SystemParams(lam=1e-3, mu=1e-3, p=2.0, q=3.0),
        SystemParams(lam=2e-3, mu=2e-3, p=2.0, q=3.0),
        SystemParams(lam=0.0, mu=0.0, p=2.0, q=3.0),
    ]
    pairs = [(params, solve_stationary_newton(op_small, params)) for params in grids]
    assert all(pair is not None for _, pair in pairs)
    verdict = check_stationary_monotonicity(pairs)
    assert verdict.holds, verdict.violations
    # identical parameters compare equal in both orders
    twin = [pairs[0], (grids[0], solve_stationary_newton(op_small, grids[0]))]
    assert check_stationary_monotonicity(twin).holds


def test_dominance_of_zero_rate_solution(op_small):
    zero = solve_stationary_newton(op_small, SystemParams(lam=0.0, mu=0.0, p=2.0, q=3.0))
    small = solve_stationary_newton(op_small, SystemParams(lam=1e-3, mu=1e-3, p=2.0, q=3.0))
    assert np.all(zero.w >= small.w) and np.all(zero.z >= small.z)


def test_classify_quenching_point(op_small):
    result = classify_parameter_point(op_small, 2.0, 3.0, 0.1, 1e-3, _solver(t_max=60.0))
    assert result.verdict == PointClass.ALL_QUENCH
    assert 8.0 < result.t_est < 10.0


def test_classify_far_outside_region(op_small):
    result = classify_parameter_point(op_small, 2.0, 2.0, 2.0, 2.0, _solver(t_max=20.0))
    assert result.verdict == PointClass.ALL_QUENCH


def test_classify_unresolved_after_escalation(op_small):
    # a global point cannot reach steady_tol within a tiny horizon even escalated
    with pytest.raises(UnresolvedClassification):
        classify_parameter_point(op_small, 2.0, 3.0, 1e-3, 1e-3, _solver(t_max=0.5))


def test_map_region_all_quench_column_brackets(op_small):
    solver = _solver(rtol=1e-5, atol=1e-10, t_max=150.0)
    region = map_region(
        op_small, 2.0, 2.0, (0.0, 0.5), (0.0, 0.5), 4, solver, bisect_steps=3
    )
    assert region.classes.shape == (4, 4)
    assert check_staircase_monotonicity(region) == []
    assert region.n_unresolved == 0
    for bracket in region.boundary:
        assert bracket.mu_star_lo < bracket.mu_star_hi
        assert bracket.mu_star_hi <= 0.125 + 1e-12  # all-quench columns shrink from mu_min


def test_map_region_with_global_cells(op_small):
    solver = _solver(rtol=1e-5, atol=1e-10, t_max=400.0, steady_tol=1e-9)
    region = map_region(
        op_small, 2.0, 3.0, (0.0, 4e-3), (0.0, 4e-3), 3, solver, bisect_steps=3
    )
    classes = region.classes.ravel().tolist()
    assert PointClass.GLOBAL in classes
    assert check_staircase_monotonicity(region) == []
    # global cells all lie inside the unit square
    for i in range(3):
        for j in range(3):
            if region.classes[i, j] == PointClass.GLOBAL:
                assert region.lambdas[i] < 1.0 and region.mus[j] < 1.0


def test_region_csv_roundtrip(tmp_path, op_small):
    solver = _solver(rtol=1e-5, atol=1e-10, t_max=150.0)
    region = map_region(
        op_small, 2.0, 2.0, (0.0, 0.5), (0.0, 0.5), 2, solver, bisect_steps=2
    )
    region_path = tmp_path / "region.csv"
    boundary_path = tmp_path / "boundary.csv"
    region.to_csv(region_path)
    region.boundary_to_csv(boundary_path)
    rows = region_path.read_text().strip().splitlines()
    assert rows[0] == "lambda,mu,class,T_est"
    assert len(rows) == 1 + 4
    brows = boundary_path.read_text().strip().splitlines()
    assert brows[0] == "lambda,mu_star_lo,mu_star_hi"
    assert len(brows) == 1 + 2
