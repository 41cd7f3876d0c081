"""Semidiscrete right-hand side of the two-component system, its Jacobian, and diagnostics.

For nodal vectors u, v the system reads

    u_i' = (W u)_i + b_i - u_i - lam * v_i**(-p)
    v_i' = (W v)_i + b_i - v_i - mu  * u_i**(-q)

where (W, b) come from :mod:`quenchlab.grid_kernel`. Both absorption terms are
singular at zero, so every evaluation demands a strictly positive state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid_kernel import ConfigurationError, NonlocalOperator

# Below this value the singular powers are evaluated in log space.
_LOG_POWER_FLOOR = 1e-12


class NumericalOverflow(ArithmeticError):
    """A singular absorption term overflowed; the caller should shrink its step."""


@dataclass(frozen=True)
class SystemParams:
    """Multiplicative parameters and exponents of the two absorption terms."""

    lam: float
    mu: float
    p: float
    q: float

    def __post_init__(self) -> None:
        if not (self.p > 0 and self.q > 0):
            raise ConfigurationError(f"exponents must be positive, got p={self.p}, q={self.q}")
        # lam = mu = 0 is admitted as a stationary-solver test limit only;
        # time evolution additionally requires strict positivity.
        if self.lam < 0 or self.mu < 0:
            raise ConfigurationError(f"rates must be nonnegative, got lam={self.lam}, mu={self.mu}")


@dataclass
class State:
    """Positive nodal values of both components at time t."""

    t: float
    u: np.ndarray
    v: np.ndarray

    def copy(self) -> "State":
        return State(self.t, self.u.copy(), self.v.copy())


@dataclass(frozen=True)
class AprioriBounds:
    """Supersolution ceilings M_u, N_v; trajectories never exceed them."""

    m_u: float
    n_v: float


def apriori_bounds(u0: np.ndarray, v0: np.ndarray) -> AprioriBounds:
    if np.any(u0 <= 0) or np.any(v0 <= 0):
        raise ConfigurationError("initial data must be strictly positive")
    return AprioriBounds(m_u=max(1.0, float(np.max(u0))), n_v=max(1.0, float(np.max(v0))))


def singular_power(g: np.ndarray, a: float) -> np.ndarray:
    """g**(-a) elementwise, evaluated in log space once g drops below 1e-12."""
    g = np.asarray(g, dtype=float)
    with np.errstate(over="ignore"):  # overflow surfaces as NumericalOverflow upstream
        small = g < _LOG_POWER_FLOOR
        if np.any(small):
            out = np.empty_like(g)
            out[small] = np.exp(-a * np.log(g[small]))
            big = ~small
            out[big] = g[big] ** (-a)
        else:
            out = g ** (-a)
    return out


def rhs_uv(
    u: np.ndarray, v: np.ndarray, op: NonlocalOperator, params: SystemParams
) -> tuple[np.ndarray, np.ndarray]:
    """Right-hand side on raw arrays; positivity of (u, v) is the caller's contract."""
    du = op.weights @ u + op.exterior_mass - u - params.lam * singular_power(v, params.p)
    dv = op.weights @ v + op.exterior_mass - v - params.mu * singular_power(u, params.q)
    if not (np.isfinite(du).all() and np.isfinite(dv).all()):
        raise NumericalOverflow("singular absorption term overflowed")
    return du, dv


def rhs(state: State, op: NonlocalOperator, params: SystemParams) -> tuple[np.ndarray, np.ndarray]:
    """Validated right-hand side at a state."""
    if np.any(state.u <= 0) or np.any(state.v <= 0):
        raise ConfigurationError("rhs requires a strictly positive state")
    if state.u.shape != (op.size,) or state.v.shape != (op.size,):
        raise ConfigurationError("state dimensions do not match the operator")
    return rhs_uv(state.u, state.v, op, params)


def jacobian_uv(
    u: np.ndarray, v: np.ndarray, op: NonlocalOperator, params: SystemParams
) -> np.ndarray:
    """Dense block Jacobian [[W - I, lam p diag(v^{-p-1})], [mu q diag(u^{-q-1}), W - I]]."""
    n = op.size
    jac = np.zeros((2 * n, 2 * n))
    diffusion = op.weights - np.eye(n)
    jac[:n, :n] = diffusion
    jac[n:, n:] = diffusion
    idx = np.arange(n)
    jac[idx, n + idx] = params.lam * params.p * singular_power(v, params.p + 1.0)
    jac[n + idx, idx] = params.mu * params.q * singular_power(u, params.q + 1.0)
    if not np.isfinite(jac).all():
        raise NumericalOverflow("Jacobian coupling term overflowed")
    return jac


def jacobian(state: State, op: NonlocalOperator, params: SystemParams) -> np.ndarray:
    if np.any(state.u <= 0) or np.any(state.v <= 0):
        raise ConfigurationError("jacobian requires a strictly positive state")
    return jacobian_uv(state.u, state.v, op, params)


def psi(a: float, g: np.ndarray | float) -> np.ndarray | float:
    """Primitive of g**(-a): g**(1-a)/(1-a) for a != 1, ln g for a = 1."""
    g_arr = np.asarray(g, dtype=float)
    if np.any(g_arr <= 0):
        raise ConfigurationError("psi requires g > 0")
    if a == 1.0:
        out = np.log(g_arr)
    else:
        out = g_arr ** (1.0 - a) / (1.0 - a)
    return float(out) if np.isscalar(g) else out


def psi_gap(state: State, params: SystemParams) -> float:
    """max_i |mu * psi(q, u_i) - lam * psi(p, v_i)|, the bounded coupling functional."""
    gap = params.mu * psi(params.q, state.u) - params.lam * psi(params.p, state.v)
    return float(np.max(np.abs(gap)))


def psi_gap_uv(u: np.ndarray, v: np.ndarray, params: SystemParams) -> float:
    gap = params.mu * psi(params.q, u) - params.lam * psi(params.p, v)
    return float(np.max(np.abs(gap)))
