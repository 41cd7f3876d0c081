"""Numerical laboratory for a two-component nonlocal diffusion system with
intertwined singular absorption terms: semidiscrete evolution, quench-time and
rate measurement, stationary solutions, parameter-region mapping, and the
delta-family shooting experiment."""

from .grid_kernel import (
    ConfigurationError,
    ExteriorMassNegative,
    Grid,
    InvalidKernel,
    Kernel,
    NonlocalOperator,
    build_grid,
    build_operator,
    kernel_from_name,
    kernel_from_table,
    kernel_mass,
)
from .integrator import (
    NumericalFailure,
    Outcome,
    Quenched,
    SolverConfig,
    Steady,
    TimedOut,
    Trajectory,
    estimate_T,
    integrate,
    rk4_fixed_step,
)
from .model import (
    AprioriBounds,
    NumericalOverflow,
    State,
    SystemParams,
    apriori_bounds,
    jacobian,
    psi,
    psi_gap,
    rhs,
)

__version__ = "0.1.0"
