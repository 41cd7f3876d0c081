from __future__ import annotations

import numpy as np
import pytest

from quenchlab import (
    SolverConfig,
    State,
    SystemParams,
    build_grid,
    build_operator,
    integrate,
    kernel_from_name,
)

HEADLINE_PARAMS = SystemParams(lam=0.1, mu=0.001, p=2.0, q=3.0)
HEADLINE_T = 9.0619

# eps_q = 1e-4 lets the threshold event fire within double-precision time
# resolution for the (1/5, 2/5)-rate headline run; see tests for the bands.
HEADLINE_SOLVER = SolverConfig(
    rtol=1e-6,
    atol=1e-12,
    dt_init=1e-3,
    dt_min=1e-14,
    dt_max=10.0,
    quench_threshold=1e-4,
    steady_tol=1e-10,
    t_max=100.0,
)


def ones_state(op) -> State:
    return State(0.0, np.ones(op.size), np.ones(op.size))


@pytest.fixture(scope="session")
def kernel():
    return kernel_from_name("epanechnikov")


@pytest.fixture(scope="session")
def op5(kernel):
    return build_operator(build_grid(-2.0, 2.0, 2), kernel)


@pytest.fixture(scope="session")
def op16(kernel):
    return build_operator(build_grid(-2.0, 2.0, 8), kernel)


@pytest.fixture(scope="session")
def op40(kernel):
    return build_operator(build_grid(-2.0, 2.0, 20), kernel)


@pytest.fixture(scope="session")
def op200(kernel):
    return build_operator(build_grid(-2.0, 2.0, 100), kernel)


@pytest.fixture(scope="session")
def headline_run(op200):
    """Figure-2 configuration: p=2, q=3, lam=0.1, mu=0.001, N=100, ones data."""
    import time

    start = time.perf_counter()
    trajectory, outcome = integrate(ones_state(op200), op200, HEADLINE_PARAMS, HEADLINE_SOLVER)
    elapsed = time.perf_counter() - start
    return trajectory, outcome, elapsed


@pytest.fixture(scope="session")
def headline_run_halved_tol(op200):
    solver = SolverConfig(
        rtol=HEADLINE_SOLVER.rtol / 2,
        atol=HEADLINE_SOLVER.atol / 2,
        dt_init=HEADLINE_SOLVER.dt_init,
        dt_min=HEADLINE_SOLVER.dt_min,
        dt_max=HEADLINE_SOLVER.dt_max,
        quench_threshold=HEADLINE_SOLVER.quench_threshold,
        steady_tol=HEADLINE_SOLVER.steady_tol,
        t_max=HEADLINE_SOLVER.t_max,
    )
    trajectory, outcome = integrate(ones_state(op200), op200, HEADLINE_PARAMS, solver)
    return trajectory, outcome


@pytest.fixture(scope="session")
def global_run(op200):
    """Stationary configuration: lam = mu = 0.001, p=2, q=3."""
    params = SystemParams(lam=0.001, mu=0.001, p=2.0, q=3.0)
    solver = SolverConfig(
        rtol=1e-6,
        atol=1e-12,
        dt_min=1e-14,
        dt_max=50.0,
        quench_threshold=1e-6,
        steady_tol=1e-11,
        t_max=600.0,
    )
    trajectory, outcome = integrate(ones_state(op200), op200, params, solver)
    return trajectory, outcome, params
