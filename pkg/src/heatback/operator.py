"""Discrete measurement operator mapping boundary samples to sensor samples.

The matrix is built by superposition: column ``j`` is the sensor trace
produced by the piecewise-linear hat function at node ``j``, computed with the
same exact exponential integrator as :func:`heatback.forward.solve_forward`.
Because every mode recursion is linear and shift invariant, the hat responses
share a single impulse-response sequence, so the whole matrix is assembled
from one pass over the modes instead of ``m + 1`` forward solves.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import GridMismatchError, HeatbackError, ProblemConfig, SampledFunction, TimeGrid
from .forward import mode_step_factors

__all__ = [
    "SingularityError",
    "OperatorMatrix",
    "kernel_partial_sum",
    "step_response",
    "assemble_operator",
    "apply_operator",
    "apply_adjoint",
    "dump_operator",
    "load_operator",
]

MAGIC = b"HBA1"
_HEADER = struct.Struct("<4sII")


class SingularityError(HeatbackError, ValueError):
    pass


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Dense lower-triangular matrix ``a`` with ``f = a @ h``."""

    a: np.ndarray
    grid: TimeGrid
    x0: float

    def __post_init__(self):
        a = np.array(self.a, dtype=float)
        n = self.grid.m + 1
        if a.shape != (n, n):
            raise ValueError(f"operator must be {n}x{n}, got {a.shape}")
        a.setflags(write=False)
        object.__setattr__(self, "a", a)

    @property
    def quad_weights(self) -> np.ndarray:
        return self.grid.weights

    @property
    def adjoint_matrix(self) -> np.ndarray:
        """``W^-1 A^T W``, the adjoint in the trapezoid-weighted inner product."""
        w = self.quad_weights
        return (self.a.T * w[None, :]) / w[:, None]


def kernel_partial_sum(t: float, tau: float, x0: float, n_terms: int | None = None) -> float:
    """Partial sum of ``sum_n pi n exp(-(pi n)^2 (t - tau)) sin(pi n x0)``.

    With ``n_terms=None`` terms are added, past the peak of
    ``pi n exp(-(pi n)^2 (t - tau))``, until that magnitude falls below
    ``1e-16`` of the accumulated absolute sum.
    """
    s = t - tau
    if not s > 0:
        raise SingularityError(f"kernel is not summable for t <= tau (t - tau = {s})")
    if n_terms is not None and n_terms < 1:
        raise ValueError("n_terms must be >= 1")
    total = 0.0
    scale = 0.0
    n = 1
    while True:
        mag = math.pi * n * math.exp(-((math.pi * n) ** 2) * s)
        if n_terms is None:
            # magnitudes increase only while (pi n)^2 < 1 / (2 s)
            if (math.pi * n) ** 2 * s > 0.5 and mag <= 1e-16 * scale:
                break
        elif n > n_terms:
            break
        total += mag * math.sin(math.pi * n * x0)
        scale += mag
        n += 1
    return total


def step_response(cfg: ProblemConfig) -> np.ndarray:
    """Series part of the sensor response to a unit boundary slope on one step.

    Entry ``p`` is ``sum_n sin(pi n x0) * (-gain_n / dt) * decay_n**p`` for
    ``p = 0 .. m-1``: the trace ``p`` steps after the step on which ``h``
    increased with unit slope.
    """
    grid = cfg.grid
    n = np.arange(1, cfg.n_modes + 1)
    decay, gain = mode_step_factors(n, grid.dt)
    coef = np.sin(np.pi * n * cfg.x0) * (-gain / grid.dt)
    p = np.arange(grid.m)
    lam_dt = (np.pi * n) ** 2 * grid.dt
    # decay**p, written via exp to stay exact for the underflowing high modes
    powers = np.exp(-np.outer(lam_dt, p))
    return coef @ powers


def assemble_operator(cfg: ProblemConfig) -> OperatorMatrix:
    """Matrix of the boundary-to-sensor map at ``cfg.x0`` on ``cfg.grid``.

    Column ``j`` equals ``solve_forward(e_j, cfg.x0, cfg)`` for the hat
    function ``e_j``; the result is exactly lower triangular.
    """
    grid = cfg.grid
    m = grid.m
    g = step_response(cfg)
    i = np.arange(m + 1)[:, None]
    j = np.arange(m + 1)[None, :]
    lag = i - j
    a = np.zeros((m + 1, m + 1))
    # h_j enters the slope of step j-1 with + sign and of step j with - sign
    rising = (lag >= 0) & (j >= 1)
    a[rising] += g[lag[rising]]
    falling = lag >= 1
    a[falling] -= g[lag[falling] - 1]
    a[np.diag_indices(m + 1)] += 1.0 - cfg.x0
    return OperatorMatrix(a, grid, cfg.x0)


def _check_grid(op: OperatorMatrix, f: SampledFunction):
    if f.grid != op.grid:
        raise GridMismatchError(f"operator grid {op.grid} != function grid {f.grid}")


def apply_operator(op: OperatorMatrix, h: SampledFunction) -> SampledFunction:
    _check_grid(op, h)
    return SampledFunction(op.grid, op.a @ h.values)


def apply_adjoint(op: OperatorMatrix, g: SampledFunction) -> SampledFunction:
    """Adjoint with respect to ``<f, g> = sum_i w_i f_i g_i``."""
    _check_grid(op, g)
    w = op.quad_weights
    return SampledFunction(op.grid, (op.a.T @ (w * g.values)) / w)


def dump_operator(op: OperatorMatrix, path) -> None:
    """Write ``op`` as ``HBA1`` header, ``u32 m``, ``u32 0``, then row-major float64."""
    # x0 and t0 are not part of the format; callers key caches on the config
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, op.grid.m, 0))
        fh.write(np.ascontiguousarray(op.a, dtype="<f8").tobytes())


def load_operator(path, cfg: ProblemConfig) -> OperatorMatrix:
    """Read a matrix written by :func:`dump_operator` for the grid of ``cfg``."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, m, _ = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if m != cfg.m:
        raise GridMismatchError(f"{path}: stored m={m}, config m={cfg.m}")
    expected = _HEADER.size + 8 * (m + 1) ** 2
    if len(data) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, got {len(data)}")
    a = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape(m + 1, m + 1)
    return OperatorMatrix(a, cfg.grid, cfg.x0)
