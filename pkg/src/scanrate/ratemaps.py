"""Invertible maps from a parameter to the log-log slope of a statistic.

Each map is strictly monotone on its parameter domain.  Inverting a slope
that lies outside the map's slope image snaps to the nearest boundary
and flags the result.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError, OutOfDomainError


@dataclass(frozen=True)
class RateMap:
    """``forward`` sends the parameter to the slope; ``inverse`` undoes it.

    ``lam_lo``/``lam_hi`` bound the parameter domain (``lo_open``/``hi_open``
    mark open ends).  ``clip`` is the closed interval every returned
    estimate is forced into, or None for maps that raise instead.
    """

    id: str
    forward: Callable[[float], float]
    inverse: Callable[[float], float]
    lam_lo: float
    lam_hi: float
    lo_open: bool = True
    hi_open: bool = False
    clip: tuple[float, float] | None = None
    decreasing: bool = True

    def in_lambda_domain(self, lam: float) -> bool:
        lo_ok = lam > self.lam_lo if self.lo_open else lam >= self.lam_lo
        hi_ok = lam < self.lam_hi if self.hi_open else lam <= self.lam_hi
        return lo_ok and hi_ok

    @property
    def slope_domain(self) -> tuple[float, float]:
        """Closure of the forward image of the parameter domain."""
        ends = [self._limit(self.lam_lo), self._limit(self.lam_hi)]
        return (min(ends), max(ends))

    def _limit(self, lam: float) -> float:
        if math.isinf(lam):
            return math.copysign(math.inf, lam) * (-1 if self.decreasing else 1)
        if lam == 0.0 and self.lo_open:
            try:
                return self.forward(lam)
            except ZeroDivisionError:
                return math.inf if self.decreasing else -math.inf
        return self.forward(lam)


@dataclass(frozen=True)
class Inversion:
    value: float
    clipped: bool


def invert_slope(rate_map: RateMap, slope: float) -> Inversion:
    if not math.isfinite(slope):
        raise OutOfDomainError(f"slope {slope} is not finite")
    lo, hi = rate_map.slope_domain
    inside = lo < slope < hi or (lo <= slope <= hi and _boundary_attained(rate_map, slope))
    if inside:
        lam = rate_map.inverse(slope)
        if rate_map.clip is not None:
            c_lo, c_hi = rate_map.clip
            if lam < c_lo or lam > c_hi:
                return Inversion(min(max(lam, c_lo), c_hi), True)
        return Inversion(lam, False)
    if rate_map.clip is None:
        raise OutOfDomainError(f"slope {slope} outside {rate_map.id} slope domain [{lo}, {hi}]")
    # nearest slope boundary -> the corresponding parameter boundary
    nearest_lo = abs(slope - lo) <= abs(slope - hi)
    c_lo, c_hi = rate_map.clip
    at_low_param = nearest_lo != rate_map.decreasing
    return Inversion(c_lo if at_low_param else c_hi, True)


def _boundary_attained(rate_map: RateMap, slope: float) -> bool:
    lam = rate_map.inverse(slope)
    return math.isfinite(lam) and rate_map.in_lambda_domain(lam)


def roundtrip_check(rate_map: RateMap, grid) -> float:
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        return 0.0
    return max(abs(rate_map.inverse(rate_map.forward(lam)) - lam) for lam in grid)


def _tail_map(map_id: str, power: float, shift: float, lam_hi: float) -> RateMap:
    # slope = power / alpha - shift
    return RateMap(
        id=map_id,
        forward=lambda a: power / a - shift,
        inverse=lambda g: power / (g + shift),
        lam_lo=0.0,
        lam_hi=lam_hi,
        clip=(0.0, lam_hi),
    )


def tail_moment_map(r: float, form: str) -> RateMap:
    """Tail index map for the r-th absolute moment (r=2: sum of squares).

    Average form (1/k)sum|x|^r scales like k^(r/alpha - 1); the sum form
    like k^(r/alpha).  Valid while r > alpha, hence the domain (0, min(r, 2)].
    """
    if form not in ("sum", "average"):
        raise DomainError(f"moment form must be 'sum' or 'average', got {form!r}")
    shift = 1.0 if form == "average" else 0.0
    rid = "tail-sum-squares" if r == 2 else f"tail-abs-{r:g}"
    suffix = "" if form == "average" else "/sum"
    return _tail_map(rid + suffix, float(r), shift, min(float(r), 2.0))


def tail_max_map() -> RateMap:
    return _tail_map("tail-max", 1.0, 0.0, 2.0)


def lm_mean_map() -> RateMap:
    """|mean_k - mu| ~ k^(-q*beta/2); parameter is the product q*beta."""
    return RateMap(
        id="lm-mean",
        forward=lambda lam: -lam / 2.0,
        inverse=lambda g: -2.0 * g,
        lam_lo=0.0,
        lam_hi=2.0,
        lo_open=True,
        hi_open=True,
        clip=(0.0, 2.0),
    )


def identity_map() -> RateMap:
    return RateMap(
        id="identity",
        forward=lambda lam: lam,
        inverse=lambda g: g,
        lam_lo=-math.inf,
        lam_hi=math.inf,
        hi_open=True,
        decreasing=False,
    )


_ABS_RE = re.compile(r"^tail-(?:abs-)?(\d+)$")

MAP_IDS = ("tail-sum-squares", "tail-2", "tail-abs-<r>", "tail-<r>", "tail-max", "lm-mean", "identity")


def get_map(map_id: str, form: str | None = None) -> RateMap:
    """Resolve a map id.  Moment maps need the statistic's form ('sum'/'average')."""
    if map_id == "tail-sum-squares":
        map_id = "tail-2"
    m = _ABS_RE.match(map_id)
    if m:
        if form is None:
            raise DomainError(f"map {map_id!r} needs a moment statistic (sum or average form)")
        return tail_moment_map(int(m.group(1)), form)
    if map_id == "tail-max":
        return tail_max_map()
    if map_id == "lm-mean":
        return lm_mean_map()
    if map_id == "identity":
        return identity_map()
    raise DomainError(f"unknown rate map {map_id!r}")


def with_clip(rate_map: RateMap, clip: tuple[float, float] | None) -> RateMap:
    from dataclasses import replace

    return replace(rate_map, clip=clip)
