"""Synthetic benchmark: known boundary history, noisy sensor data, reconstruction, bound.

Ground truths vanish together with their first derivative at both ends of the
time interval and are scaled to a prescribed fraction of the class radius
``r1``. Exact sensor data are computed on a twice finer grid (or with the
finite-difference solver) and restricted, so the inversion never sees data made
by its own discretization.
"""
from __future__ import annotations

import csv
import enum
import io
import math
import time
from dataclasses import dataclass

import numpy as np

from .bounds import ErrorBoundReport, MultiplierCheck, error_bound, inverse_multiplier_bound_check
from .core import ProblemConfig, SampledFunction, h2_seminorm_pair, l2_norm
from .forward import fd_oracle_solve, solve_forward
from .operator import OperatorMatrix, assemble_operator
from .tikhonov import TikhonovSystem, select_alpha_discrepancy

__all__ = [
    "ProfileKind",
    "TruthProfile",
    "ExperimentRecord",
    "Instance",
    "profile_shape",
    "generate_truth",
    "exact_data",
    "add_noise",
    "run_experiment",
    "sweep",
    "CSV_COLUMNS",
    "records_to_csv",
]


class ProfileKind(str, enum.Enum):
    POLY_BUMP = "poly_bump"
    SINE_BUMP = "sine_bump"
    DOUBLE_BUMP = "double_bump"


@dataclass(frozen=True)
class TruthProfile:
    kind: ProfileKind = ProfileKind.POLY_BUMP
    scale_to_r1_fraction: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ProfileKind(self.kind))
        if not 0.0 < self.scale_to_r1_fraction <= 1.0:
            raise ValueError(
                f"scale_to_r1_fraction must lie in (0, 1], got {self.scale_to_r1_fraction}")


def _poly_piece(t, a, b):
    # (t-a)^2 (b-t)^2 on [a, b], zero elsewhere; C^1 with jumps in h''
    inside = (t >= a) & (t <= b)
    return np.where(inside, (t - a) ** 2 * (b - t) ** 2, 0.0) / ((b - a) / 2.0) ** 4


def profile_shape(kind: ProfileKind, t: np.ndarray, t0: float) -> np.ndarray:
    """Unscaled shape of a ground-truth profile at times ``t``."""
    kind = ProfileKind(kind)
    t = np.asarray(t, dtype=float)
    if kind is ProfileKind.POLY_BUMP:
        return t ** 2 * (t0 - t) ** 2
    if kind is ProfileKind.SINE_BUMP:
        return np.sin(np.pi * t / t0) ** 2 * np.sin(2.0 * np.pi * t / t0)
    return _poly_piece(t, 0.0, 0.55 * t0) - 0.6 * _poly_piece(t, 0.35 * t0, t0)


def _class_norm(values: np.ndarray, cfg_grid) -> float:
    a, b = h2_seminorm_pair(SampledFunction(cfg_grid, values))
    return math.sqrt(a + b)


def _scale(profile: TruthProfile, cfg: ProblemConfig) -> float:
    shape = profile_shape(profile.kind, cfg.grid.points, cfg.t0)
    return profile.scale_to_r1_fraction * cfg.r1 / _class_norm(shape, cfg.grid)


def generate_truth(profile: TruthProfile, cfg: ProblemConfig) -> SampledFunction:
    """Ground truth on ``cfg.grid`` with discrete class norm ``fraction * r1``."""
    c = _scale(profile, cfg)
    return SampledFunction(cfg.grid, c * profile_shape(profile.kind, cfg.grid.points, cfg.t0))


def exact_data(profile: TruthProfile, cfg: ProblemConfig, oracle_forward: bool = False,
               refine: int = 2, x_points: int = 400) -> SampledFunction:
    """Noise-free sensor data, computed on a ``refine`` times finer time grid.

    The profile is scaled exactly as in :func:`generate_truth`, so the data
    belong to that ground truth.
    """
    c = _scale(profile, cfg)
    fine = cfg.replace(m=cfg.m * refine, n_modes=cfg.n_modes)
    h_fine = SampledFunction(fine.grid, c * profile_shape(profile.kind, fine.grid.points, cfg.t0))
    if oracle_forward:
        trace = fd_oracle_solve(h_fine, x_points, fine).trace(cfg.x0)
    else:
        trace = solve_forward(h_fine, cfg.x0, fine)
    return SampledFunction(cfg.grid, trace.values[::refine])


def add_noise(f0: SampledFunction, delta: float, seed: int) -> SampledFunction:
    """Add Gaussian noise rescaled to weighted norm exactly ``delta``."""
    if delta < 0:
        raise ValueError(f"delta must be nonnegative, got {delta}")
    if delta == 0:
        return f0
    rng = np.random.default_rng(seed)
    e = SampledFunction(f0.grid, rng.standard_normal(len(f0)))
    return f0 + e * (delta / l2_norm(e))


@dataclass(frozen=True)
class ExperimentRecord:
    config: ProblemConfig
    profile: TruthProfile
    delta: float
    seed: int
    alpha: float
    measured_error: float
    bound2omega: float
    residual: float
    wall_time: float
    asymptotic_valid: bool = False
    h0_norm: float = float("nan")

    @property
    def relative_error(self) -> float:
        return self.measured_error / self.h0_norm

    @property
    def bound_respected(self) -> bool:
        return self.measured_error <= self.bound2omega


class Instance:
    """Everything reusable across noise levels and seeds for one configuration."""

    def __init__(self, cfg: ProblemConfig, profile: TruthProfile, oracle_forward: bool = False,
                 op: OperatorMatrix | None = None):
        self.cfg = cfg
        self.profile = profile
        self.op = op if op is not None else assemble_operator(cfg)
        self.system = TikhonovSystem(self.op)
        self.h0 = generate_truth(profile, cfg)
        self.f0 = exact_data(profile, cfg, oracle_forward=oracle_forward)
        a, b = h2_seminorm_pair(self.h0)
        # a-priori radius handed to the bound: the truth's own class norm
        self.r1_true = math.sqrt(a + b)
        self.check: MultiplierCheck = inverse_multiplier_bound_check(cfg.x0)

    @property
    def f0_norm(self) -> float:
        return l2_norm(self.f0)

    def bound(self, delta: float) -> ErrorBoundReport:
        return error_bound(delta, self.r1_true, self.cfg.x0, check=self.check)

    def run(self, delta: float, seed: int) -> ExperimentRecord:
        start = time.perf_counter()
        f_delta = add_noise(self.f0, delta, seed)
        sol = select_alpha_discrepancy(self.op, f_delta, delta, system=self.system)
        err = l2_norm(sol.h - self.h0)
        report = self.bound(delta)
        elapsed = time.perf_counter() - start
        return ExperimentRecord(self.cfg, self.profile, float(delta), int(seed), sol.alpha, err,
                                report.reconstruction_bound, sol.residual, elapsed,
                                report.asymptotic_valid, l2_norm(self.h0))


def run_experiment(cfg: ProblemConfig, profile: TruthProfile, delta: float, seed: int,
                   oracle_forward: bool = False) -> ExperimentRecord:
    """Truth, exact data, noise of norm ``delta``, discrepancy-principle inversion, bound.

    Raises
    ------
    NoiseDominatesError
        If the noisy data are not larger than ``delta``.
    """
    return Instance(cfg, profile, oracle_forward).run(delta, seed)


def sweep(cfg: ProblemConfig, profile: TruthProfile, deltas, seeds, *, relative: bool = False,
          oracle_forward: bool = False, instance: Instance | None = None) -> list[ExperimentRecord]:
    """All ``(delta, seed)`` combinations, sharing one operator and factorization setup.

    With ``relative=True`` each delta is multiplied by ``||f0||``. Records are
    ordered by the given delta order, then seed order.
    """
    deltas, seeds = list(deltas), list(seeds)
    if not deltas or not seeds:
        raise ValueError("deltas and seeds must be nonempty")
    inst = instance if instance is not None else Instance(cfg, profile, oracle_forward)
    scale = inst.f0_norm if relative else 1.0
    return [inst.run(d * scale, s) for d in deltas for s in seeds]


CSV_COLUMNS = ["x0", "t0", "m", "n_modes", "r1", "profile", "scale_to_r1_fraction", "delta",
               "seed", "alpha", "measured_error", "bound2omega", "residual", "wall_time",
               "asymptotic_valid"]


def _fmt(x: float) -> str:
    return format(x, ".17g")


def records_to_csv(records, stream=None, include_wall_time: bool = True) -> str:
    """Write records as CSV; floats carry 17 significant digits."""
    out = stream if stream is not None else io.StringIO()
    cols = CSV_COLUMNS if include_wall_time else [c for c in CSV_COLUMNS if c != "wall_time"]
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(cols)
    for r in records:
        row = {
            "x0": _fmt(r.config.x0), "t0": _fmt(r.config.t0), "m": r.config.m,
            "n_modes": r.config.n_modes, "r1": _fmt(r.config.r1),
            "profile": r.profile.kind.value,
            "scale_to_r1_fraction": _fmt(r.profile.scale_to_r1_fraction),
            "delta": _fmt(r.delta), "seed": r.seed, "alpha": _fmt(r.alpha),
            "measured_error": _fmt(r.measured_error), "bound2omega": _fmt(r.bound2omega),
            "residual": _fmt(r.residual), "wall_time": _fmt(r.wall_time),
            "asymptotic_valid": int(r.asymptotic_valid),
        }
        writer.writerow([row[c] for c in cols])
    return out.getvalue() if stream is None else ""
