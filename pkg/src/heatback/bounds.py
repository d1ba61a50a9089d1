"""Frequency-domain symbol of the boundary-to-sensor map and the a-priori error bound.

On the half line the sensor trace is the boundary history multiplied, frequency
by frequency, by

    sinh(mu (1 - x0) sqrt(tau)) / sinh(mu sqrt(tau)),   mu = (1 + i) / sqrt(2).

Its exponential decay in ``sqrt(tau)`` is what makes the reconstruction only
logarithmically stable. The worst-case error over the smoothness ball of radius
``r1`` is bounded by ``r1 / sqrt(1 + tau_bar^4)`` with
``tau_bar = ln^2(r1 / (9 delta)) / (2 x0^2)``, provided ``tau_bar`` lies in the
asymptotic range where the symbol estimates apply.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import HeatbackError

__all__ = [
    "MU0",
    "BoundDomainError",
    "MultiplierPoint",
    "MultiplierCheck",
    "ErrorBoundReport",
    "spectral_multiplier",
    "multiplier_magnitudes",
    "multiplier_deficit",
    "symbol_strictly_decreasing",
    "default_tau_grid",
    "inverse_multiplier_bound_check",
    "tau_bar",
    "error_bound",
]

MU0 = (1.0 + 1.0j) / math.sqrt(2.0)

FORMULA_NOTE = ("bound = r1/sqrt(1+tau_bar^4) with tau_bar = ln^2(r1/(9 delta))/(2 x0^2); "
                "reconstruction_bound = 2 * bound")


class BoundDomainError(HeatbackError, ValueError):
    pass


@dataclass(frozen=True)
class MultiplierPoint:
    tau: float
    value: complex
    magnitude: float


def _check_x0(x0):
    if not 0.0 < x0 < 1.0:
        raise BoundDomainError(f"x0 must lie in (0, 1), got {x0}")


def _ratio(s: float, x0: float) -> complex:
    # sinh(mu (1-x0) s) / sinh(mu s) for s = sqrt(tau) > 0
    if s < 1.0:
        return cmath.sinh(MU0 * (1.0 - x0) * s) / cmath.sinh(MU0 * s)
    # factor out exp(mu s) and exp(mu (1-x0) s); both remainders stay O(1)
    num = 1.0 - cmath.exp(-2.0 * MU0 * (1.0 - x0) * s)
    den = 1.0 - cmath.exp(-2.0 * MU0 * s)
    return cmath.exp(-MU0 * x0 * s) * num / den


def spectral_multiplier(tau: float, x0: float) -> MultiplierPoint:
    """Symbol of the boundary-to-sensor map at frequency ``tau >= 0``."""
    _check_x0(x0)
    if not tau >= 0:
        raise BoundDomainError(f"tau must be nonnegative, got {tau}")
    value = complex(1.0 - x0) if tau == 0 else _ratio(math.sqrt(tau), x0)
    return MultiplierPoint(float(tau), value, abs(value))


def multiplier_magnitudes(taus, x0: float) -> np.ndarray:
    return np.array([spectral_multiplier(float(t), x0).magnitude for t in np.ravel(taus)])


def _sinh_sin_excess(a: float) -> float:
    # (sinh^2 a + sin^2 a) / (2 a^2) - 1 = sum_{j>=2} 2 (2a)^(4j-4) / (4j-2)!, for a < 1
    total = 0.0
    for j in range(11, 1, -1):
        k = 4 * j - 2
        total += 2.0 * (2.0 * a) ** (k - 2) / math.factorial(k)
    return total


def multiplier_deficit(tau: float, x0: float) -> float:
    """Relative shortfall ``1 - |symbol(tau)| / (1 - x0)``, accurate for tiny ``tau``.

    For small frequencies the magnitude differs from ``1 - x0`` by ``O(tau^2)``,
    well below double-precision resolution of the magnitude itself. With
    ``a = sqrt(tau / 2)`` one has ``|sinh(mu s)|^2 = sinh^2 a + sin^2 a``, whose
    deviation from ``2 a^2`` is summed as a series.
    """
    _check_x0(x0)
    if not tau >= 0:
        raise BoundDomainError(f"tau must be nonnegative, got {tau}")
    if tau == 0:
        return 0.0
    a = math.sqrt(tau / 2.0)
    if a >= 1.0:
        return 1.0 - spectral_multiplier(tau, x0).magnitude / (1.0 - x0)
    g_full = _sinh_sin_excess(a)
    g_part = _sinh_sin_excess((1.0 - x0) * a)
    q = (g_full - g_part) / (1.0 + g_full)
    return q / (1.0 + math.sqrt(1.0 - q))


def symbol_strictly_decreasing(taus, x0: float) -> bool:
    """Whether ``|symbol|`` strictly decreases along the increasing grid ``taus``.

    Below ``tau = 1`` successive magnitudes can agree to the last bit, so the
    comparison there uses :func:`multiplier_deficit`; above it the magnitudes
    themselves are compared.
    """
    taus = np.asarray(taus, dtype=float)
    if np.any(np.diff(taus) <= 0):
        raise ValueError("taus must be strictly increasing")
    small = taus <= 1.0
    deficit = np.array([multiplier_deficit(t, x0) for t in taus[small]])
    mags = multiplier_magnitudes(taus[~small], x0)
    ok_small = bool(np.all(np.diff(deficit) > 0))
    ok_large = bool(np.all(np.diff(mags) < 0))
    # across the seam: last small point vs first large point
    ok_seam = True
    if deficit.size and mags.size:
        ok_seam = bool(mags[0] < spectral_multiplier(taus[small][-1], x0).magnitude)
    return ok_small and ok_large and ok_seam


def default_tau_grid(n: int = 2000, lo: float = 1e-6, hi: float = 1e4) -> np.ndarray:
    return np.logspace(math.log10(lo), math.log10(hi), n)


@dataclass
class MultiplierCheck:
    """Outcome of scanning the reciprocal symbol on a frequency grid.

    ``tau0`` is the first grid frequency ``>= 2`` from which on
    ``exp(x0 sqrt(tau/2)) >= r2``. ``tau0_asymptotic`` is the first grid
    frequency ``>= tau0`` from which on additionally
    ``tau^2 <= exp(x0 sqrt(tau/2))``; the bound is asymptotically valid for
    ``tau_bar`` at or beyond it. Either is ``None`` if the grid ends first.
    """

    x0: float
    r2: float
    tau0: float | None
    tau0_asymptotic: float | None
    n_checked: int
    violations_8: list = field(default_factory=list)
    violations_9: list = field(default_factory=list)
    max_ratio_8: float = 0.0
    monotone: bool = True

    @property
    def ok(self) -> bool:
        return not self.violations_8 and not self.violations_9


def _first_tail_index(mask: np.ndarray) -> int | None:
    # first index k with mask[k:] all True
    if mask.size == 0 or not mask[-1]:
        return None
    bad = np.flatnonzero(~mask)
    return 0 if bad.size == 0 else int(bad[-1]) + 1


def inverse_multiplier_bound_check(x0: float, tau_grid=None) -> MultiplierCheck:
    """Check the growth estimates of ``|sinh(mu s)| / |sinh(mu (1-x0) s)|``.

    ``r2`` is the maximum of the ratio over ``[0, 2]`` (grid points there plus
    both endpoints, the value at 0 being ``1 / (1 - x0)``). At every grid point
    ``tau >= 2`` the ratio is compared with ``8 exp(x0 sqrt(tau/2))``, and at
    every point ``tau >= tau0`` with ``9 exp(x0 sqrt(tau/2))``.
    """
    _check_x0(x0)
    taus = default_tau_grid() if tau_grid is None else np.sort(np.asarray(tau_grid, float))
    if taus.size and (taus[0] < 0 or taus[-1] > 1e4):
        raise BoundDomainError("tau grid must lie in [0, 1e4]")
    ratio = 1.0 / multiplier_magnitudes(taus, x0)
    growth = np.exp(x0 * np.sqrt(taus / 2.0))

    low = taus <= 2.0
    r2_candidates = [1.0 / (1.0 - x0), 1.0 / spectral_multiplier(2.0, x0).magnitude]
    r2 = max(r2_candidates + list(ratio[low]))

    high = taus >= 2.0
    hi_taus, hi_ratio, hi_growth = taus[high], ratio[high], growth[high]
    bad8 = hi_ratio > 8.0 * hi_growth
    violations_8 = [(float(t), float(r)) for t, r in zip(hi_taus[bad8], hi_ratio[bad8])]
    max_ratio_8 = float(np.max(hi_ratio / hi_growth)) if hi_taus.size else 0.0

    k0 = _first_tail_index(hi_growth >= r2)
    tau0 = None if k0 is None else float(hi_taus[k0])
    tau0_asym = None
    violations_9 = []
    if k0 is not None:
        tail_t, tail_g, tail_r = hi_taus[k0:], hi_growth[k0:], hi_ratio[k0:]
        bad9 = tail_r > 9.0 * tail_g
        violations_9 = [(float(t), float(r)) for t, r in zip(tail_t[bad9], tail_r[bad9])]
        ka = _first_tail_index(tail_t ** 2 <= tail_g)
        tau0_asym = None if ka is None else float(tail_t[ka])
    return MultiplierCheck(float(x0), float(r2), tau0, tau0_asym, int(hi_taus.size),
                           violations_8, violations_9, max_ratio_8,
                           symbol_strictly_decreasing(taus[taus > 0], x0))


def tau_bar(delta: float, r1: float, x0: float) -> float:
    """``ln^2(r1 / (9 delta)) / (2 x0^2)``, or 0 when ``r1 <= 9 delta``."""
    if not delta > 0:
        raise BoundDomainError(f"delta must be positive, got {delta}")
    if not r1 > 0:
        raise BoundDomainError(f"r1 must be positive, got {r1}")
    _check_x0(x0)
    if r1 <= 9.0 * delta:
        return 0.0
    return math.log(r1 / (9.0 * delta)) ** 2 / (2.0 * x0 ** 2)


@dataclass(frozen=True)
class ErrorBoundReport:
    delta: float
    r1: float
    x0: float
    tau_bar: float
    bound: float
    asymptotic_valid: bool
    tau0: float | None
    r2: float
    tau0_asymptotic: float | None = None
    note: str = FORMULA_NOTE

    @property
    def reconstruction_bound(self) -> float:
        """Guaranteed ``||h_delta - h0||``: twice the modulus bound."""
        return 2.0 * self.bound

    def as_dict(self) -> dict:
        d = asdict(self)
        d["reconstruction_bound"] = self.reconstruction_bound
        return d

    def to_text(self) -> str:
        return "\n".join(f"{k} = {v}" for k, v in self.as_dict().items())


def error_bound(delta: float, r1: float, x0: float,
                check: MultiplierCheck | None = None) -> ErrorBoundReport:
    """Upper bound ``r1 / sqrt(1 + tau_bar^4)`` on the modulus of continuity.

    ``check`` defaults to :func:`inverse_multiplier_bound_check` on the
    default grid; pass one in to reuse it across many deltas.
    """
    tb = tau_bar(delta, r1, x0)
    check = check if check is not None else inverse_multiplier_bound_check(x0)
    # r1 / sqrt(1 + tb^4), arranged so tb^4 cannot overflow
    bound = r1 if tb == 0 else r1 / (tb * tb) / math.sqrt(1.0 + (1.0 / tb) ** 4)
    valid = check.tau0_asymptotic is not None and tb >= check.tau0_asymptotic
    return ErrorBoundReport(float(delta), float(r1), float(x0), tb, bound, bool(valid),
                            check.tau0, check.r2, check.tau0_asymptotic)
