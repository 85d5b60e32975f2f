"""Slope of log T_k against log k.

Four fits are offered: least squares with an intercept, least squares
through the origin, least absolute deviations with an intercept, and
least squares on a window k = m..b+m.  Logs are natural throughout.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDesignError, DomainError, InsufficientSampleError

METHODS = ("ols-intercept", "ols-origin", "lad-intercept")


@dataclass(frozen=True, eq=False)
class LogLogSample:
    """Retained (k, Y_k) pairs plus the ks that were dropped and why."""

    ks: np.ndarray
    ys: np.ndarray
    dropped: list[tuple[int, str]] = field(default_factory=list)
    provenance: str = ""

    @property
    def log_ks(self) -> np.ndarray:
        return np.log(self.ks)

    def __len__(self) -> int:
        return len(self.ks)

    def to_csv(self) -> str:
        rows = [(int(k), y, True) for k, y in zip(self.ks, self.ys)]
        rows += [(k, math.nan, False) for k, _ in self.dropped]
        rows.sort()
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["k", "log_k", "Y_k", "retained"])
        for k, y, kept in rows:
            writer.writerow([k, f"{math.log(k):.12g}", f"{y:.12g}" if kept else "", "true" if kept else "false"])
        return buf.getvalue()


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float | None
    method: str
    k_range: tuple[int, int]
    n_used: int
    residual_sum: float


def build_loglog_sample(
    values,
    trim_n0: int = 1,
    center: float | None = None,
    provenance: str = "",
    max_drop_fraction: float | None = 0.5,
) -> LogLogSample:
    """Log-transform a trajectory from k = trim_n0 on.

    Without a center, Y_k = log T_k and nonpositive T_k are dropped.  With a
    center c, Y_k = log|T_k - c| and exact ties T_k == c are dropped.
    Dropping more than ``max_drop_fraction`` of the range is an error
    (pass None to skip that check).
    """
    t = np.asarray(getattr(values, "values", values), dtype=float)
    n = t.size
    if not 1 <= trim_n0 <= n:
        raise DomainError(f"trim_n0={trim_n0} outside 1..{n}")
    ks = np.arange(trim_n0, n + 1)
    t = t[trim_n0 - 1 :]
    if center is None:
        keep = t > 0
        reason = "nonpositive"
        with np.errstate(divide="ignore", invalid="ignore"):
            ys = np.log(t)
    else:
        diff = np.abs(t - center)
        keep = diff > 0
        reason = "tie-with-center"
        with np.errstate(divide="ignore"):
            ys = np.log(diff)
    bad = ~np.isfinite(ys) & keep
    keep &= ~bad
    dropped = [(int(k), reason) for k in ks[(~keep) & ~bad]] + [(int(k), "non-finite") for k in ks[bad]]
    dropped.sort()
    if keep.sum() < 2:
        raise InsufficientSampleError(f"only {int(keep.sum())} usable points after dropping {len(dropped)}")
    if max_drop_fraction is not None and len(dropped) > max_drop_fraction * ks.size:
        raise InsufficientSampleError(f"{len(dropped)} of {ks.size} points dropped ({reason})")
    return LogLogSample(ks[keep], ys[keep], dropped, provenance)


def _require_spread(x: np.ndarray) -> None:
    if x.size < 2 or np.ptp(x) == 0:
        raise DegenerateDesignError("regression needs at least two distinct k")


def ols_slope(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    xc = x - x.mean()
    slope = float(np.dot(xc, y - y.mean()) / np.dot(xc, xc))
    return slope, float(y.mean() - slope * x.mean())


def fit_ols_intercept(sample: LogLogSample) -> SlopeFit:
    x, y = sample.log_ks, sample.ys
    _require_spread(x)
    slope, intercept = ols_slope(x, y)
    resid = y - intercept - slope * x
    return SlopeFit(slope, intercept, "ols-intercept", _krange(sample), len(sample), float(resid @ resid))


def fit_ols_origin(sample: LogLogSample) -> SlopeFit:
    x, y = sample.log_ks, sample.ys
    sxx = float(x @ x)
    if sxx == 0:
        raise DegenerateDesignError("through-origin fit needs some k >= 2")
    slope = float(x @ y) / sxx
    resid = y - slope * x
    return SlopeFit(slope, None, "ols-origin", _krange(sample), len(sample), float(resid @ resid))


def lad_line(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Exact least-absolute-deviations line; returns (slope, intercept, objective).

    Some optimal line passes through a data point.  For a line pinned at
    point i the best slope is a weighted median of the slopes to the other
    points (weights |x_j - x_i|), so scanning every pivot is exact in
    O(p^2 log p).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    p = x.size
    best = (math.inf, 0.0, 0.0)
    chunk = max(1, 4_000_000 // max(p, 1))
    for lo in range(0, p, chunk):
        piv = np.arange(lo, min(p, lo + chunk))
        dx = x[None, :] - x[piv, None]
        dy = y[None, :] - y[piv, None]
        w = np.abs(dx)
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.where(w > 0, dy / np.where(w > 0, dx, 1.0), np.inf)
        order = np.argsort(s, axis=1, kind="stable")
        s_sorted = np.take_along_axis(s, order, axis=1)
        cw = np.cumsum(np.take_along_axis(w, order, axis=1), axis=1)
        half = cw[:, -1:] / 2.0
        idx = np.argmax(cw >= half, axis=1)
        slopes = s_sorted[np.arange(piv.size), idx]
        intercepts = y[piv] - slopes * x[piv]
        obj = np.abs(y[None, :] - intercepts[:, None] - slopes[:, None] * x[None, :]).sum(axis=1)
        j = int(np.argmin(obj))
        if obj[j] < best[0]:
            best = (float(obj[j]), float(slopes[j]), float(intercepts[j]))
    return best[1], best[2], best[0]


def fit_lad_intercept(sample: LogLogSample) -> SlopeFit:
    x, y = sample.log_ks, sample.ys
    _require_spread(x)
    slope, intercept, obj = lad_line(x, y)
    return SlopeFit(slope, intercept, "lad-intercept", _krange(sample), len(sample), obj)


def fit_windowed(sample: LogLogSample, m: int, b: int) -> SlopeFit:
    """Least squares with intercept on the retained ks in [m, b + m]."""
    if m < 1 or b < 1:
        raise DomainError(f"window needs m >= 1 and b >= 1, got m={m}, b={b}")
    mask = (sample.ks >= m) & (sample.ks <= b + m)
    if mask.sum() < 2:
        raise InsufficientSampleError(f"fewer than 2 retained points in window [{m}, {b + m}]")
    sub = LogLogSample(sample.ks[mask], sample.ys[mask], sample.dropped, sample.provenance)
    fit = fit_ols_intercept(sub)
    return SlopeFit(fit.slope, fit.intercept, "ols-intercept", (m, b + m), fit.n_used, fit.residual_sum)


def fit(sample: LogLogSample, method: str) -> SlopeFit:
    if method == "ols-intercept":
        return fit_ols_intercept(sample)
    if method == "ols-origin":
        return fit_ols_origin(sample)
    if method == "lad-intercept":
        return fit_lad_intercept(sample)
    raise DomainError(f"unknown regression method {method!r}")


def _krange(sample: LogLogSample) -> tuple[int, int]:
    return int(sample.ks[0]), int(sample.ks[-1])
