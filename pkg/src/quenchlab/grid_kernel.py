"""Uniform 1-D grids, admissible convolution kernels, and the discrete nonlocal operator.

The operator couples interior quadrature weights ``W[i][j] = h * J(x_i - x_j)``
with the exterior Dirichlet mass ``b_i = 1 - sum_j W[i][j]``, so that a row sum
plus its exterior mass is exactly one: unit kernel mass split into the part
seen inside the domain and the part feeling the boundary value 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

KERNEL_MASS_TOL = 1e-6
EXTERIOR_MASS_TOL = 1e-3


class ConfigurationError(ValueError):
    """Invalid grid, kernel, or parameter configuration."""


class InvalidKernel(ConfigurationError):
    """Kernel fails symmetry, monotonicity, or unit-mass validation."""


class ExteriorMassNegative(ConfigurationError):
    """Quadrature row mass exceeds 1 beyond tolerance: grid too coarse for the kernel."""


@dataclass(frozen=True)
class Grid:
    """Uniform grid of 2N+1 nodes on [a, b] with spacing h = (b - a) / (2N)."""

    a: float
    b: float
    n_half: int
    nodes: np.ndarray
    h: float

    @property
    def size(self) -> int:
        return self.nodes.size


def build_grid(a: float, b: float, n_half: int) -> Grid:
    """Build the uniform grid x_{-N} .. x_N spanning [a, b] with exact endpoints."""
    if not (a < b):
        raise ConfigurationError(f"domain endpoints must satisfy a < b, got ({a}, {b})")
    if n_half < 1:
        raise ConfigurationError(f"node-count parameter N must be >= 1, got {n_half}")
    n = int(n_half)
    h = (b - a) / (2 * n)
    nodes = np.linspace(a, b, 2 * n + 1)
    return Grid(a=float(a), b=float(b), n_half=n, nodes=nodes, h=h)


@dataclass(frozen=True)
class Kernel:
    """Nonnegative, symmetric, radially nonincreasing kernel with unit mass."""

    descriptor: str
    support_radius: float
    evaluator: Callable[[np.ndarray], np.ndarray] = field(repr=False)

    def __call__(self, x: np.ndarray | float) -> np.ndarray:
        return np.asarray(self.evaluator(np.asarray(x, dtype=float)))


def _epanechnikov(x: np.ndarray) -> np.ndarray:
    return 0.75 * np.clip(1.0 - x * x, 0.0, None)


def _uniform(x: np.ndarray) -> np.ndarray:
    return np.where(np.abs(x) <= 1.0, 0.5, 0.0)


_BUILTIN_KERNELS: dict[str, tuple[Callable[[np.ndarray], np.ndarray], float]] = {
    "epanechnikov": (_epanechnikov, 1.0),
    "uniform": (_uniform, 1.0),
}


def kernel_mass(kernel: Kernel, resolution: int = 1024) -> float:
    """Composite-Simpson mass of the kernel over its support."""
    if resolution < 64:
        raise ConfigurationError(f"quadrature resolution must be >= 64, got {resolution}")
    n_int = resolution + (resolution % 2)  # Simpson needs an even interval count
    r = kernel.support_radius
    x = np.linspace(-r, r, n_int + 1)
    y = kernel(x)
    w = np.ones(n_int + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    step = 2.0 * r / n_int
    return float(np.sum(w * y) * step / 3.0)


def validate_kernel(kernel: Kernel, resolution: int = 1024) -> None:
    """Check symmetry, monotone decay in |x|, nonnegativity, and unit mass."""
    r = kernel.support_radius
    if not (r > 0):
        raise InvalidKernel(f"support radius must be positive, got {r}")
    xs = np.linspace(0.0, r, 513)
    right = kernel(xs)
    left = kernel(-xs)
    if np.any(right < 0) or np.any(left < 0):
        raise InvalidKernel(f"kernel '{kernel.descriptor}' takes negative values")
    if not np.allclose(right, left, rtol=0.0, atol=1e-12):
        raise InvalidKernel(f"kernel '{kernel.descriptor}' is not symmetric")
    if np.any(np.diff(right) > 1e-12):
        raise InvalidKernel(f"kernel '{kernel.descriptor}' is not nonincreasing in |x|")
    mass = kernel_mass(kernel, resolution)
    if abs(mass - 1.0) > KERNEL_MASS_TOL:
        raise InvalidKernel(
            f"kernel '{kernel.descriptor}' has mass {mass:.8f}, expected 1 within {KERNEL_MASS_TOL}"
        )


def kernel_from_name(name: str) -> Kernel:
    """Look up a built-in kernel by name and validate it."""
    try:
        evaluator, radius = _BUILTIN_KERNELS[name]
    except KeyError:
        known = ", ".join(sorted(_BUILTIN_KERNELS))
        raise ConfigurationError(f"unknown kernel '{name}' (built-ins: {known})") from None
    kernel = Kernel(descriptor=name, support_radius=radius, evaluator=evaluator)
    validate_kernel(kernel)
    return kernel


def kernel_from_table(path: str | Path) -> Kernel:
    """Load a tabulated kernel profile: two-column text ``x value``, strictly increasing x.

    Values are interpolated linearly and extended by zero outside the tabulated range.
    """
    path = Path(path)
    try:
        data = np.loadtxt(path, dtype=float)
    except OSError as exc:
        raise ConfigurationError(f"cannot read kernel table {path}: {exc}") from exc
    if data.ndim != 2 or data.shape[1] != 2:
        raise ConfigurationError(f"kernel table {path} must have exactly two columns")
    xs, vals = data[:, 0], data[:, 1]
    if np.any(np.diff(xs) <= 0):
        raise ConfigurationError(f"kernel table {path} abscissae must be strictly increasing")

    def evaluator(x: np.ndarray) -> np.ndarray:
        return np.interp(x, xs, vals, left=0.0, right=0.0)

    radius = float(max(abs(xs[0]), abs(xs[-1])))
    kernel = Kernel(descriptor=f"table:{path.name}", support_radius=radius, evaluator=evaluator)
    validate_kernel(kernel)
    return kernel


@dataclass(frozen=True)
class NonlocalOperator:
    """Dense quadrature weights W and exterior Dirichlet mass b on a fixed grid."""

    grid: Grid
    weights: np.ndarray        # (2N+1, 2N+1), W[i][j] = h * J(x_i - x_j)
    exterior_mass: np.ndarray  # (2N+1,), b_i = 1 - sum_j W[i][j]

    @property
    def size(self) -> int:
        return self.grid.size


def build_operator(grid: Grid, kernel: Kernel) -> NonlocalOperator:
    """Assemble W[i][j] = h * J(x_i - x_j) and b = 1 - row sums of W."""
    diffs = grid.nodes[:, None] - grid.nodes[None, :]
    weights = grid.h * kernel(diffs)
    if np.any(weights < 0):
        raise InvalidKernel(f"kernel '{kernel.descriptor}' produced negative weights")
    exterior_mass = 1.0 - weights.sum(axis=1)
    worst = float(exterior_mass.min())
    if worst < -EXTERIOR_MASS_TOL:
        raise ExteriorMassNegative(
            f"exterior mass reaches {worst:.3e} < -{EXTERIOR_MASS_TOL}: "
            f"grid (h={grid.h:.4g}) too coarse for kernel '{kernel.descriptor}'"
        )
    return NonlocalOperator(grid=grid, weights=weights, exterior_mass=exterior_mass)


def exact_exterior_mass(grid: Grid, kernel: Kernel, resolution: int = 4096) -> np.ndarray:
    """High-resolution quadrature of 1 - integral over [a,b] of J(x_i - y) dy, per node.

    Reference values for refinement-consistency checks of the discrete b vector.
    """
    n_int = resolution + (resolution % 2)
    y = np.linspace(grid.a, grid.b, n_int + 1)
    w = np.ones(n_int + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    step = (grid.b - grid.a) / n_int
    vals = kernel(grid.nodes[:, None] - y[None, :])
    interior = (vals * w[None, :]).sum(axis=1) * step / 3.0
    return 1.0 - interior
