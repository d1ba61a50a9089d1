"""Direct problem: heat equation on ``0 < x < 1`` driven by the boundary value at x=0.

The trace ``u(x, t)`` is evaluated from the sine-series representation

    u(x, t) = (1 - x) h(t) + sum_n v_n(t) sin(pi n x),

where each mode obeys ``v_n' + (pi n)^2 v_n = -(2 / (pi n)) h'`` with
``v_n(0) = 0``.  With ``h`` piecewise linear between samples the ODE is
integrated exactly over every step, which keeps the stiff high modes stable.

:func:`fd_oracle_solve` is an unrelated Crank-Nicolson discretization of the
same boundary-value problem, used to cross-check the series route.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded
from scipy.signal import lfilter

from .core import HeatbackError, ProblemConfig, SampledFunction, TimeGrid

__all__ = [
    "InvalidModeError",
    "DomainError",
    "ModeCoefficients",
    "TemperatureField",
    "mode_step_factors",
    "evolve_mode",
    "evolve_modes",
    "solve_forward",
    "fd_oracle_solve",
]


class InvalidModeError(HeatbackError, ValueError):
    pass


class DomainError(HeatbackError, ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ModeCoefficients:
    n: int
    v: SampledFunction


@dataclass(frozen=True, eq=False)
class TemperatureField:
    """``u`` sampled on a space grid (rows) times a :class:`TimeGrid` (columns)."""

    xgrid: np.ndarray
    tgrid: TimeGrid
    values: np.ndarray

    def trace(self, x: float) -> SampledFunction:
        """Time history at ``x``, linearly interpolated between space nodes."""
        if not 0.0 <= x <= 1.0:
            raise DomainError(f"x must lie in [0, 1], got {x}")
        k = int(np.searchsorted(self.xgrid, x, side="right")) - 1
        k = min(max(k, 0), len(self.xgrid) - 2)
        x_lo, x_hi = self.xgrid[k], self.xgrid[k + 1]
        theta = (x - x_lo) / (x_hi - x_lo)
        if theta == 0.0:
            row = self.values[k]
        elif theta == 1.0:
            row = self.values[k + 1]
        else:
            row = (1.0 - theta) * self.values[k] + theta * self.values[k + 1]
        return SampledFunction(self.tgrid, row)


def mode_step_factors(n: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-step decay ``exp(-lam dt)`` and forcing gain for modes ``n``.

    One step of the exact integrator reads
    ``v_{i+1} = decay * v_i - gain * (h_{i+1} - h_i) / dt``.
    """
    n = np.asarray(n, dtype=float)
    lam = (np.pi * n) ** 2
    one_minus_decay = -np.expm1(-lam * dt)
    decay = 1.0 - one_minus_decay
    gain = 2.0 / (np.pi * n * lam) * one_minus_decay
    return decay, gain


def _check_mode(n):
    if int(n) != n or n < 1:
        raise InvalidModeError(f"mode index must be an integer >= 1, got {n}")


def evolve_mode(n: int, h: SampledFunction) -> ModeCoefficients:
    """Coefficient ``v_n(t)`` of sine mode ``n`` driven by the boundary history ``h``."""
    _check_mode(n)
    n = int(n)
    decay, gain = mode_step_factors(np.array([n]), h.grid.dt)
    slope = np.diff(h.values) / h.grid.dt
    v = np.zeros(h.grid.m + 1)
    v[1:] = lfilter([1.0], [1.0, -decay[0]], -gain[0] * slope)
    return ModeCoefficients(n, SampledFunction(h.grid, v))


def evolve_modes(n_modes: int, h: SampledFunction) -> np.ndarray:
    """Coefficients of modes ``1..n_modes`` as an ``(n_modes, m+1)`` array."""
    _check_mode(n_modes)
    decay, gain = mode_step_factors(np.arange(1, n_modes + 1), h.grid.dt)
    slope = np.diff(h.values) / h.grid.dt
    out = np.zeros((n_modes, h.grid.m + 1))
    for k in range(n_modes):
        out[k, 1:] = lfilter([1.0], [1.0, -decay[k]], -gain[k] * slope)
    return out


def solve_forward(h: SampledFunction, x: float, cfg: ProblemConfig) -> SampledFunction:
    """Temperature history ``u(x, .)`` for boundary history ``h``.

    Parameters
    ----------
    h : SampledFunction
        Boundary values at ``x = 0``; treated as piecewise linear in time.
    x : float
        Observation point in ``[0, 1]``.
    cfg : ProblemConfig
        Supplies the series truncation ``n_modes``.

    Returns
    -------
    SampledFunction
        ``u(x, t_i)`` on the grid of ``h``.
    """
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"x must lie in [0, 1], got {x}")
    n = np.arange(1, cfg.n_modes + 1)
    if x == 1.0:
        # sin(pi n) is only zero to roundoff
        return SampledFunction.zeros(h.grid)
    modes = evolve_modes(cfg.n_modes, h)
    u = (1.0 - x) * h.values + np.sin(np.pi * n * x) @ modes
    return SampledFunction(h.grid, u)


def fd_oracle_solve(h: SampledFunction, x_points: int, cfg: ProblemConfig | None = None
                    ) -> TemperatureField:
    """Crank-Nicolson solution of the direct problem.

    ``x_points`` is the number of space intervals; the field has
    ``x_points + 1`` rows including both Dirichlet boundaries. Time steps
    coincide with the grid of ``h``. ``cfg`` is accepted for signature
    symmetry with :func:`solve_forward` and is not otherwise needed.
    """
    if x_points < 8:
        raise ValueError(f"x_points must be >= 8, got {x_points}")
    grid = h.grid
    nx = int(x_points)
    dx = 1.0 / nx
    r = grid.dt / dx ** 2
    n_int = nx - 1

    # (I - r/2 L) in banded storage
    ab = np.empty((3, n_int))
    ab[0, :] = -0.5 * r
    ab[1, :] = 1.0 + r
    ab[2, :] = -0.5 * r
    ab[0, 0] = 0.0
    ab[2, -1] = 0.0

    hv = h.values
    field = np.zeros((nx + 1, grid.m + 1))
    field[0, :] = hv
    u = np.zeros(n_int)
    for k in range(grid.m):
        rhs = (1.0 - r) * u
        rhs[1:] += 0.5 * r * u[:-1]
        rhs[:-1] += 0.5 * r * u[1:]
        rhs[0] += 0.5 * r * (hv[k] + hv[k + 1])
        u = solve_banded((1, 1), ab, rhs, check_finite=False)
        field[1:-1, k + 1] = u
    return TemperatureField(np.linspace(0.0, 1.0, nx + 1), grid, field)
