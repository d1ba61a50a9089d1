"""Uniform time grids, sampled functions and the discrete norms built on them."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "HeatbackError",
    "ResolutionError",
    "GridMismatchError",
    "TimeGrid",
    "SampledFunction",
    "ProblemConfig",
    "default_n_modes",
    "trapezoid_weights",
    "l2_norm",
    "inner",
    "h2_seminorm_pair",
]


class HeatbackError(Exception):
    """Base class for all errors raised by this package."""


class ResolutionError(HeatbackError, ValueError):
    """Grid too coarse for the requested difference operator."""


class GridMismatchError(HeatbackError, ValueError):
    """Two objects live on different time grids."""


@dataclass(frozen=True)
class TimeGrid:
    """Uniform partition of ``[0, t0]`` into ``m`` intervals."""

    t0: float
    m: int

    def __post_init__(self):
        if not (math.isfinite(self.t0) and self.t0 > 0):
            raise ValueError(f"t0 must be positive and finite, got {self.t0}")
        if int(self.m) != self.m or self.m < 2:
            raise ValueError(f"m must be an integer >= 2, got {self.m}")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "t0", float(self.t0))

    @property
    def dt(self) -> float:
        return self.t0 / self.m

    @property
    def points(self) -> np.ndarray:
        return np.arange(self.m + 1) * self.dt

    @property
    def weights(self) -> np.ndarray:
        return trapezoid_weights(self.m + 1, self.dt)

    def refine(self, factor: int) -> "TimeGrid":
        return TimeGrid(self.t0, self.m * factor)


@dataclass(frozen=True, eq=False)
class SampledFunction:
    """Nodal values of a function on a :class:`TimeGrid`.

    The values array is copied and made read-only on construction.
    """

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.m + 1,):
            raise ValueError(
                f"expected {self.grid.m + 1} samples, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("sampled values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_callable(cls, grid: TimeGrid, func) -> "SampledFunction":
        return cls(grid, func(grid.points))

    @classmethod
    def zeros(cls, grid: TimeGrid) -> "SampledFunction":
        return cls(grid, np.zeros(grid.m + 1))

    @property
    def t(self) -> np.ndarray:
        return self.grid.points

    def _check(self, other: "SampledFunction"):
        if other.grid != self.grid:
            raise GridMismatchError(f"{self.grid} != {other.grid}")

    def __add__(self, other):
        self._check(other)
        return SampledFunction(self.grid, self.values + other.values)

    def __sub__(self, other):
        self._check(other)
        return SampledFunction(self.grid, self.values - other.values)

    def __mul__(self, c):
        return SampledFunction(self.grid, float(c) * self.values)

    __rmul__ = __mul__

    def __neg__(self):
        return SampledFunction(self.grid, -self.values)

    def __len__(self):
        return len(self.values)

    def __repr__(self):
        return f"SampledFunction(grid={self.grid!r}, n={len(self.values)})"


def default_n_modes(dt: float) -> int:
    """Series truncation used when none is configured.

    Mode ``n`` is damped by ``exp(-(pi n)^2 dt)`` over one step; the rule keeps
    that factor below ``exp(-16)`` for every discarded mode. The floor of 400
    handles the slowly decaying quasi-static tail, whose modes fall off only
    like ``n^-3``.
    """
    return max(400, math.ceil(4.0 / (math.pi * math.sqrt(dt))))


@dataclass(frozen=True)
class ProblemConfig:
    """Geometry, discretization and a-priori class radius of one problem.

    Parameters
    ----------
    x0 : float
        Sensor location, strictly inside ``(0, 1)``.
    t0 : float
        Final time.
    m : int
        Number of time intervals.
    n_modes : int, optional
        Sine-series truncation. ``None`` selects :func:`default_n_modes`.
    r1 : float
        Radius of the smoothness class ``||h||^2 + ||h''||^2 <= r1^2``.
    """

    x0: float = 0.5
    t0: float = 1.0
    m: int = 800
    n_modes: int | None = None
    r1: float = 1.0
    grid: TimeGrid = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 0.0 < self.x0 < 1.0:
            raise ValueError(f"x0 must lie in (0, 1), got {self.x0}")
        if not self.r1 > 0:
            raise ValueError(f"r1 must be positive, got {self.r1}")
        grid = TimeGrid(self.t0, self.m)
        object.__setattr__(self, "grid", grid)
        if self.n_modes is None:
            object.__setattr__(self, "n_modes", default_n_modes(grid.dt))
        elif int(self.n_modes) != self.n_modes or self.n_modes < 1:
            raise ValueError(f"n_modes must be an integer >= 1, got {self.n_modes}")
        object.__setattr__(self, "n_modes", int(self.n_modes))
        object.__setattr__(self, "x0", float(self.x0))
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "r1", float(self.r1))

    def replace(self, **changes) -> "ProblemConfig":
        fields = {"x0": self.x0, "t0": self.t0, "m": self.m,
                  "n_modes": self.n_modes, "r1": self.r1}
        if "m" in changes or "t0" in changes:
            # a new grid gets its own default truncation unless one is given
            fields["n_modes"] = None
        fields.update(changes)
        return ProblemConfig(**fields)

    def as_dict(self) -> dict:
        return {"x0": self.x0, "t0": self.t0, "m": self.m,
                "n_modes": self.n_modes, "r1": self.r1}


def trapezoid_weights(n: int, dt: float) -> np.ndarray:
    """Composite trapezoid weights for ``n`` equispaced nodes."""
    w = np.full(n, dt)
    w[0] = w[-1] = 0.5 * dt
    return w


def inner(f: SampledFunction, g: SampledFunction) -> float:
    """Trapezoid-weighted inner product on the common grid."""
    f._check(g)
    return float(np.dot(f.grid.weights * f.values, g.values))


def l2_norm(f: SampledFunction) -> float:
    """Discrete ``L2[0, t0]`` norm with trapezoid weights."""
    scale = float(np.max(np.abs(f.values)))
    if scale == 0.0:
        return 0.0
    # scaled to avoid under/overflow of the squares
    v = f.values / scale
    return scale * math.sqrt(float(np.dot(f.grid.weights, v * v)))


def second_difference(values: np.ndarray, dt: float) -> np.ndarray:
    """Central second difference on the interior nodes ``1 .. m-1``."""
    return (values[2:] - 2.0 * values[1:-1] + values[:-2]) / dt ** 2


def h2_seminorm_pair(h: SampledFunction) -> tuple[float, float]:
    """Return ``(||h||^2, ||h''||^2)``.

    ``h''`` is the central second difference, integrated by the trapezoid
    rule over ``[t_1, t_{m-1}]``.

    Raises
    ------
    ResolutionError
        If the grid has fewer than four intervals.
    """
    grid = h.grid
    if grid.m < 4:
        raise ResolutionError(f"need m >= 4 for a second difference, got m={grid.m}")
    d2 = second_difference(h.values, grid.dt)
    w2 = trapezoid_weights(grid.m - 1, grid.dt)
    return l2_norm(h) ** 2, float(np.dot(w2, d2 ** 2))
