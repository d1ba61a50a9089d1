"""Second-order Tikhonov regularization with a residual-matching parameter choice.

For fixed ``alpha`` the reconstruction minimizes

    ||A h - f||^2 + alpha * (||h||^2 + ||h''||^2)

over samples with ``h(0) = h(t0) = 0``. Norms are trapezoid weighted, so the
first-order condition is ``(A^T W A + alpha P) h = A^T W f`` on the interior
nodes, with ``P = W + D2^T W2 D2``. Dividing by ``W`` gives the operator form
``(A*A + alpha W^-1 P) h = A* f``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .core import (GridMismatchError, HeatbackError, ResolutionError, SampledFunction,
                   TimeGrid, l2_norm, trapezoid_weights)
from .operator import OperatorMatrix, SingularityError

__all__ = [
    "ParameterError",
    "NoiseDominatesError",
    "BracketingError",
    "PenaltyMatrix",
    "RegularizedSolution",
    "TikhonovSystem",
    "assemble_penalty",
    "solve_regularized",
    "residual_at",
    "objective",
    "objective_gradient",
    "select_alpha_discrepancy",
]

log = logging.getLogger(__name__)


class ParameterError(HeatbackError, ValueError):
    pass


class NoiseDominatesError(HeatbackError):
    """``||f_delta|| <= delta``: no positive alpha matches the noise level."""


class BracketingError(HeatbackError):
    pass


@dataclass(frozen=True, eq=False)
class PenaltyMatrix:
    p: np.ndarray
    grid: TimeGrid

    def quadratic_form(self, h: SampledFunction) -> float:
        return float(h.values @ self.p @ h.values)


@dataclass(frozen=True, eq=False)
class RegularizedSolution:
    h: SampledFunction
    alpha: float
    residual: float
    bisection_steps: int
    converged: bool
    # (alpha, residual, ||h||) for every solve, in evaluation order
    trace: tuple = field(default=(), repr=False)

    def trace_sorted(self) -> np.ndarray:
        """Logged evaluations as an array sorted by alpha."""
        arr = np.array(self.trace, dtype=float).reshape(-1, 3)
        return arr[np.argsort(arr[:, 0], kind="stable")]


def second_difference_matrix(m: int, dt: float) -> np.ndarray:
    """``(m-1) x (m+1)`` central second difference."""
    d2 = np.zeros((m - 1, m + 1))
    r = np.arange(m - 1)
    d2[r, r] = 1.0
    d2[r, r + 1] = -2.0
    d2[r, r + 2] = 1.0
    return d2 / dt ** 2


def assemble_penalty(grid: TimeGrid) -> PenaltyMatrix:
    """Discrete ``||h||^2 + ||h''||^2`` as the symmetric matrix ``W + D2^T W2 D2``."""
    if grid.m < 4:
        raise ResolutionError(f"need m >= 4 for the penalty, got m={grid.m}")
    d2 = second_difference_matrix(grid.m, grid.dt)
    w2 = trapezoid_weights(grid.m - 1, grid.dt)
    p = d2.T @ (w2[:, None] * d2)
    p = 0.5 * (p + p.T)
    p[np.diag_indices_from(p)] += grid.weights
    return PenaltyMatrix(p, grid)


class TikhonovSystem:
    """Normal-equation pieces shared by every solve with one operator.

    Building this once and passing it around avoids recomputing
    ``A^T W A`` for every trial ``alpha``.
    """

    def __init__(self, op: OperatorMatrix, penalty: PenaltyMatrix | None = None):
        self.op = op
        self.penalty = penalty if penalty is not None else assemble_penalty(op.grid)
        self.weights = op.grid.weights
        a_int = op.a[:, 1:-1]
        self.gram = a_int.T @ (self.weights[:, None] * a_int)
        self.p_int = self.penalty.p[1:-1, 1:-1]

    @property
    def grid(self) -> TimeGrid:
        return self.op.grid

    def _check(self, f: SampledFunction):
        if f.grid != self.grid:
            raise GridMismatchError(f"operator grid {self.grid} != data grid {f.grid}")

    def solve(self, f_delta: SampledFunction, alpha: float) -> SampledFunction:
        if not alpha > 0:
            raise ParameterError(f"alpha must be positive, got {alpha}")
        self._check(f_delta)
        rhs = self.op.a[:, 1:-1].T @ (self.weights * f_delta.values)
        try:
            factor = cho_factor(self.gram + alpha * self.p_int, check_finite=False)
        except LinAlgError as exc:
            raise SingularityError(f"normal matrix not positive definite at alpha={alpha}") from exc
        h = np.zeros(self.grid.m + 1)
        h[1:-1] = cho_solve(factor, rhs, check_finite=False)
        return SampledFunction(self.grid, h)

    def residual(self, h: SampledFunction, f_delta: SampledFunction) -> float:
        return l2_norm(SampledFunction(self.grid, self.op.a @ h.values - f_delta.values))


def solve_regularized(op: OperatorMatrix, f_delta: SampledFunction, alpha: float,
                      system: TikhonovSystem | None = None) -> SampledFunction:
    """Minimizer of the Tikhonov functional with ``h(0) = h(t0) = 0``.

    Raises
    ------
    ParameterError
        If ``alpha <= 0``.
    SingularityError
        If the Cholesky factorization breaks down.
    """
    system = system if system is not None else TikhonovSystem(op)
    return system.solve(f_delta, alpha)


def residual_at(op: OperatorMatrix, f_delta: SampledFunction, alpha: float,
                system: TikhonovSystem | None = None) -> float:
    """``||A h_alpha - f_delta||`` (not squared)."""
    system = system if system is not None else TikhonovSystem(op)
    return system.residual(system.solve(f_delta, alpha), f_delta)


def objective(op: OperatorMatrix, penalty: PenaltyMatrix, f_delta: SampledFunction,
              alpha: float, h: SampledFunction) -> float:
    r = SampledFunction(op.grid, op.a @ h.values - f_delta.values)
    return l2_norm(r) ** 2 + alpha * penalty.quadratic_form(h)


def objective_gradient(op: OperatorMatrix, penalty: PenaltyMatrix, f_delta: SampledFunction,
                       alpha: float, h: SampledFunction) -> SampledFunction:
    """Gradient of :func:`objective` in the weighted inner product.

    Equals ``2 A*(A h - f) + 2 alpha W^-1 P h``; the two boundary entries are
    zero because ``h(0)`` and ``h(t0)`` are not free.
    """
    w = op.grid.weights
    resid = op.a @ h.values - f_delta.values
    grad = 2.0 * (op.a.T @ (w * resid) + alpha * (penalty.p @ h.values)) / w
    grad[0] = grad[-1] = 0.0
    return SampledFunction(op.grid, grad)


def select_alpha_discrepancy(op: OperatorMatrix, f_delta: SampledFunction, delta: float, *,
                             rtol: float = 1e-3, bracket: tuple[float, float] = (1e-14, 1e2),
                             max_expansions: int = 60, max_bisections: int = 200,
                             system: TikhonovSystem | None = None) -> RegularizedSolution:
    """Choose ``alpha`` so that ``||A h_alpha - f_delta|| = delta``.

    Bisection runs on ``log10(alpha)``. The initial bracket is widened by one
    decade on the offending side until the residual straddles ``delta``.

    Raises
    ------
    NoiseDominatesError
        If ``||f_delta|| <= delta``; the caller decides what to return.
    BracketingError
        If ``max_expansions`` widenings do not produce a bracket.
    """
    if not delta > 0:
        raise ParameterError(f"delta must be positive, got {delta}")
    norm_f = l2_norm(f_delta)
    if norm_f <= delta:
        raise NoiseDominatesError(
            f"||f_delta|| = {norm_f:.6g} <= delta = {delta:.6g}; "
            "the residual equation needs ||f_delta|| > delta")
    system = system if system is not None else TikhonovSystem(op)
    trace = []

    def evaluate(log_alpha):
        alpha = 10.0 ** log_alpha
        h = system.solve(f_delta, alpha)
        r = system.residual(h, f_delta)
        trace.append((alpha, r, l2_norm(h)))
        return h, r

    lo, hi = math.log10(bracket[0]), math.log10(bracket[1])
    h_lo, r_lo = evaluate(lo)
    h_hi, r_hi = evaluate(hi)
    expansions = 0
    while not (r_lo <= delta <= r_hi):
        if expansions >= max_expansions:
            raise BracketingError(
                f"no bracket after {expansions} expansions: "
                f"residual({10 ** lo:.3g})={r_lo:.6g}, residual({10 ** hi:.3g})={r_hi:.6g}, "
                f"delta={delta:.6g}")
        expansions += 1
        if r_lo > delta:
            lo -= 1.0
            h_lo, r_lo = evaluate(lo)
        else:
            hi += 1.0
            h_hi, r_hi = evaluate(hi)

    for cand_log, cand_h, cand_r in ((lo, h_lo, r_lo), (hi, h_hi, r_hi)):
        if abs(cand_r - delta) <= rtol * delta:
            return RegularizedSolution(cand_h, 10.0 ** cand_log, cand_r, 0, True, tuple(trace))

    steps = 0
    converged = False
    h_mid, r_mid, mid = h_lo, r_lo, lo
    while steps < max_bisections:
        steps += 1
        mid = 0.5 * (lo + hi)
        h_mid, r_mid = evaluate(mid)
        if abs(r_mid - delta) <= rtol * delta:
            converged = True
            break
        if r_mid < delta:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    log.debug("alpha=%.6g residual=%.6g delta=%.6g steps=%d", 10.0 ** mid, r_mid, delta, steps)
    return RegularizedSolution(h_mid, 10.0 ** mid, r_mid, steps, converged, tuple(trace))
