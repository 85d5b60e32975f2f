"""Rate estimation pipelines.

Uncentered: Y_k = log T_k regressed on log k along a scan, slope inverted
through a rate map.  Centered: Y_k = log|T_k - T_n| on a window
k = m..b+m.  Either can be repeated over N random scans and aggregated by
mean or median.  The Hill estimator is included as a benchmark.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import scanmodel
from .blockstats import Statistic, Trajectory, batch_value, trajectory_matrix
from .errors import (
    DegenerateDataError,
    DomainError,
    InsufficientSampleError,
    ScanRateError,
)
from .ratemaps import RateMap, get_map, invert_slope, with_clip
from .sloperegress import METHODS, SlopeFit, build_loglog_sample, fit, fit_windowed

SCAN_POLICIES = ("direct", "reverse", "uniform", "uniform-start")
AGGREGATIONS = ("none", "mean", "median")
MIN_POINTS = 4


@dataclass(frozen=True)
class EstimatorSpec:
    statistic: str = "mean-squares"
    rate_map: str = "tail-2"
    method: str = "ols-intercept"
    trim_n0: int = 1
    scan: str = "direct"
    scans: int = 1
    seed: int | None = None
    aggregation: str = "none"
    centered: bool = False
    m: int | None = None
    b: int | None = None
    clip: tuple[float, float] | None = None

    def __post_init__(self):
        Statistic.parse(self.statistic)
        if self.method not in METHODS:
            raise DomainError(f"unknown regression method {self.method!r}")
        if self.scan not in SCAN_POLICIES:
            raise DomainError(f"unknown scan policy {self.scan!r}")
        if self.aggregation not in AGGREGATIONS:
            raise DomainError(f"unknown aggregation {self.aggregation!r}")
        if self.scans < 1:
            raise DomainError("scan count N must be >= 1")
        if self.trim_n0 < 1:
            raise DomainError("trim_n0 must be >= 1")
        if self.aggregation == "none" and self.scans != 1:
            raise DomainError("several scans need an aggregation (mean or median)")
        if self.centered and self.method == "ols-origin":
            raise DomainError("the centered pipeline fits with an intercept")

    @property
    def stat(self) -> Statistic:
        return Statistic.parse(self.statistic)

    def resolve_map(self) -> RateMap:
        rate_map = get_map(self.rate_map, self.stat.form)
        return with_clip(rate_map, self.clip) if self.clip is not None else rate_map

    def window(self, n: int) -> tuple[int, int]:
        """(m, b) for the centered pipeline; defaults b = floor(n^(2/3)), m = 10."""
        b = self.b if self.b is not None else int(math.floor(n ** (2 / 3) + 1e-9))
        m = self.m if self.m is not None else max(1, min(10, n - b))
        if m < 1 or b < 1 or b + m > n:
            raise DomainError(f"centered window needs 1 <= m, b >= 1 and b + m <= n; got m={m}, b={b}, n={n}")
        return m, b

    def to_dict(self) -> dict:
        d = asdict(self)
        d["clip"] = list(self.clip) if self.clip is not None else None
        return d


@dataclass
class EstimateReport:
    estimate: float
    per_scan: np.ndarray
    clipped: np.ndarray
    slopes: np.ndarray
    dropped: np.ndarray
    excluded: int
    spec: dict
    fits: list[SlopeFit] | None = None
    extra: dict = field(default_factory=dict)

    @property
    def clipped_fraction(self) -> float:
        return float(np.mean(self.clipped)) if self.clipped.size else 0.0

    def to_dict(self) -> dict:
        return {
            "estimate": _num(self.estimate),
            "per_scan": [_num(v) for v in self.per_scan],
            "clipped": [bool(c) for c in self.clipped],
            "slopes": [_num(v) for v in self.slopes],
            "dropped": [int(d) for d in self.dropped],
            "excluded": int(self.excluded),
            "clipped_fraction": _num(self.clipped_fraction),
            "spec": self.spec,
            **self.extra,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    CSV_HEADER = "estimate,scans,excluded,clipped_fraction,statistic,map,method,aggregation,seed"

    def to_csv_row(self) -> str:
        s = self.spec
        return ",".join(
            [
                f"{self.estimate:.12g}",
                str(len(self.per_scan)),
                str(self.excluded),
                f"{self.clipped_fraction:.12g}",
                s["statistic"],
                s["rate_map"],
                s["method"],
                s["aggregation"],
                "" if s.get("seed") is None else str(s["seed"]),
            ]
        )


def _num(v: float) -> float | None:
    v = float(v)
    return float(f"{v:.12g}") if math.isfinite(v) else None


def aggregate(values, how: str) -> float:
    values = np.asarray(values, dtype=float)
    if how == "median":
        return float(np.median(values))
    return float(np.mean(values))


# --- single trajectory -----------------------------------------------------


def estimate_trajectory(
    values, spec: EstimatorSpec, center: float | None = None, n: int | None = None
) -> tuple[float, bool, SlopeFit, int]:
    """Estimate from one trajectory: (estimate, clipped, fit, dropped count).

    With ``spec.centered`` the center defaults to the last trajectory value
    and the default window is sized from ``n`` (the series length, which
    defaults to the trajectory length).
    """
    values = np.asarray(getattr(values, "values", values), dtype=float)
    n = values.size if n is None else n
    rate_map = spec.resolve_map()
    if spec.centered:
        m, b = spec.window(n)
        c = values[-1] if center is None else center
        sample = build_loglog_sample(values[: b + m], 1, center=c, max_drop_fraction=None)
        in_window = sum(1 for k, _ in sample.dropped if m <= k <= b + m)
        if in_window > (b + 1) / 2:
            raise DegenerateDataError(f"{in_window} of {b + 1} window points tie with the center")
        if spec.method == "lad-intercept":
            mask = (sample.ks >= m) & (sample.ks <= b + m)
            sub = replace(sample, ks=sample.ks[mask], ys=sample.ys[mask])
            slope_fit = fit(sub, "lad-intercept")
        else:
            slope_fit = fit_windowed(sample, m, b)
    else:
        sample = build_loglog_sample(values, spec.trim_n0, center=center)
        if len(sample) < MIN_POINTS:
            raise InsufficientSampleError(f"need at least {MIN_POINTS} retained points, have {len(sample)}")
        slope_fit = fit(sample, spec.method)
    inv = invert_slope(rate_map, slope_fit.slope)
    return inv.value, inv.clipped, slope_fit, len(sample.dropped)


# --- many scans at once ------------------------------------------------------


def _ols_rows(x: np.ndarray, y: np.ndarray, origin: bool) -> np.ndarray:
    # row-local reductions: a row's slope must not depend on how many rows share the call
    if origin:
        return (y * x).sum(axis=1) / (x @ x)
    xc = x - x.mean()
    return ((y - y.mean(axis=1, keepdims=True)) * xc).sum(axis=1) / (xc @ xc)


def scan_estimates(series, bits: np.ndarray, spec: EstimatorSpec, keep_fits: bool = False) -> EstimateReport:
    """Per-scan estimates for every row of the shrink matrix ``bits``.

    Rows whose log-trajectory is clean go through one vectorized least
    squares solve; rows with dropped points, and all LAD fits, go through
    the per-trajectory path.  Failing scans are excluded; more than half
    failing is an error.  The report's estimate is the configured
    aggregation (mean when aggregation is 'none' and there is one scan).
    """
    x = np.asarray(series, dtype=float)
    n = x.size
    bits = np.atleast_2d(bits)
    count = bits.shape[0]
    stat = spec.stat
    rate_map = spec.resolve_map()
    if spec.centered:
        m, b = spec.window(n)
        kmax, k_lo = b + m, m
        center = batch_value(x, stat)
    else:
        if n - spec.trim_n0 + 1 < MIN_POINTS:
            raise InsufficientSampleError(f"series of length {n} too short after trimming")
        kmax, k_lo, center = n, spec.trim_n0, None
    traj = trajectory_matrix(x, bits, stat, kmax=kmax)

    slopes = np.full(count, np.nan)
    dropped = np.zeros(count, dtype=int)
    fits: list[SlopeFit | None] = [None] * count
    failures: list[str] = []
    fast = np.zeros(count, dtype=bool)
    if spec.method != "lad-intercept" and not keep_fits:
        window = traj[:, k_lo - 1 : kmax]
        with np.errstate(divide="ignore", invalid="ignore"):
            ys = np.log(window) if center is None else np.log(np.abs(window - center))
        fast = np.all(np.isfinite(ys), axis=1)
        if center is None:
            fast &= np.all(window > 0, axis=1)
        if fast.any():
            logk = np.log(np.arange(k_lo, kmax + 1, dtype=float))
            slopes[fast] = _ols_rows(logk, ys[fast], spec.method == "ols-origin")
    for i in np.flatnonzero(~fast):
        try:
            sample_values = traj[i]
            if center is not None:
                _, _, slope_fit, nd = estimate_trajectory(sample_values, spec, center=center, n=n)
            else:
                sample = build_loglog_sample(sample_values, spec.trim_n0)
                if len(sample) < MIN_POINTS:
                    raise InsufficientSampleError(f"need at least {MIN_POINTS} retained points")
                slope_fit, nd = fit(sample, spec.method), len(sample.dropped)
        except ScanRateError as exc:
            failures.append(f"scan {i}: {exc}")
            continue
        slopes[i] = slope_fit.slope
        dropped[i] = nd
        fits[i] = slope_fit

    ok = np.isfinite(slopes)
    if (~ok).sum() > count / 2:
        raise DegenerateDataError(f"{int((~ok).sum())} of {count} scans failed: {failures[:3]}")
    estimates = np.full(count, np.nan)
    clipped = np.zeros(count, dtype=bool)
    for i in np.flatnonzero(ok):
        inv = invert_slope(rate_map, float(slopes[i]))
        estimates[i], clipped[i] = inv.value, inv.clipped
    how = "mean" if spec.aggregation == "none" else spec.aggregation
    report = EstimateReport(
        estimate=aggregate(estimates[ok], how),
        per_scan=estimates[ok],
        clipped=clipped[ok],
        slopes=slopes[ok],
        dropped=dropped[ok],
        excluded=int((~ok).sum()),
        spec=spec.to_dict(),
        fits=[f for f, good in zip(fits, ok) if good] if keep_fits else None,
    )
    if spec.centered:
        report.extra.update(center=_num(center), window={"m": m, "b": b})
    return report


def scan_bits(spec: EstimatorSpec, n: int, rng: np.random.Generator | None = None) -> np.ndarray:
    """Shrink matrix for the estimator's scan policy (N identical rows for direct/reverse)."""
    if spec.scan == "direct":
        return np.zeros((spec.scans, n - 1), dtype=bool)
    if spec.scan == "reverse":
        return np.ones((spec.scans, n - 1), dtype=bool)
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    if spec.scan == "uniform-start":
        return scanmodel.start_uniform_shrink_bits(n, spec.scans, rng)
    return scanmodel.random_shrink_bits(n, spec.scans, rng)


def estimate_uncentered_single(series, spec: EstimatorSpec, rng=None, keep_fits: bool = False) -> EstimateReport:
    if spec.scans != 1 or spec.centered:
        raise DomainError("single-scan estimation takes an uncentered spec with N = 1")
    x = np.asarray(series, dtype=float)
    return scan_estimates(x, scan_bits(spec, x.size, rng), spec, keep_fits)


def estimate_scanned(series, spec: EstimatorSpec, rng=None, bits=None, keep_fits: bool = False) -> EstimateReport:
    """lambda* (mean) or lambda** (median) over N scans drawn from ``rng`` or ``spec.seed``."""
    x = np.asarray(series, dtype=float)
    if bits is None:
        bits = scan_bits(spec, x.size, rng)
    return scan_estimates(x, bits, spec, keep_fits)


def estimate_centered(series, spec: EstimatorSpec, rng=None, bits=None, keep_fits: bool = False) -> EstimateReport:
    if not spec.centered:
        spec = replace(spec, centered=True)
    return estimate_scanned(series, spec, rng, bits, keep_fits)


def estimate(series, spec: EstimatorSpec, rng=None, bits=None, keep_fits: bool = False) -> EstimateReport:
    return estimate_scanned(series, spec, rng, bits, keep_fits)


def diverging_transform(traj: Trajectory, lower_bound: float) -> Trajectory:
    """Multiply T_k by k^(-G) so a statistic shrinking to zero at rate
    k^g(lambda) with G < g(lambda) becomes diverging; the log-log slope moves
    by exactly -G.  Only rate-revealing when the statistic's limit is 0.
    """
    values = np.asarray(traj.values, dtype=float)
    if np.any(values < 0):
        raise DomainError("transform needs a nonnegative statistic")
    ks = np.arange(1, values.size + 1, dtype=float)
    return Trajectory(values * ks ** (-lower_bound), traj.scan, traj.stat)


def combined_median_estimate(series, base_spec: EstimatorSpec, R: int, rng=None, bits=None) -> float:
    """Median over r = 2..R of the scan-median estimates from |x|^r moments."""
    return combined_median_details(series, base_spec, R, rng, bits)[0]


def combined_median_details(series, base_spec: EstimatorSpec, R: int, rng=None, bits=None):
    if R < 2:
        raise DomainError("R must be >= 2")
    x = np.asarray(series, dtype=float)
    if bits is None:
        bits = scan_bits(base_spec, x.size, rng)
    form = base_spec.stat.form or "average"
    kind = "abs-moment-mean" if form == "average" else "abs-moment-sum"
    per_r = []
    for r in range(2, R + 1):
        spec = replace(base_spec, statistic=f"{kind}:{r}", rate_map=f"tail-abs-{r}", aggregation="median" if base_spec.scans > 1 else "none")
        per_r.append(scan_estimates(x, bits, spec).estimate)
    return float(np.median(per_r)), per_r


# --- Hill benchmark ------------------------------------------------------------


HILL_TAILS = ("abs", "upper")


def hill_estimates(series, qs, tail: str = "abs", strict: bool = True) -> np.ndarray:
    """1/H_q for every q in ``qs``; inf where H_q = 0.

    ``tail='abs'`` ranks |X_t|; ``tail='upper'`` ranks X_t itself, so only the
    right tail is used.  A nonpositive threshold order statistic is an error
    when ``strict``, otherwise that q yields nan.
    """
    if tail not in HILL_TAILS:
        raise DomainError(f"unknown Hill tail {tail!r}")
    x = np.asarray(series, dtype=float)
    a = np.sort(np.abs(x) if tail == "abs" else x)[::-1]  # descending
    n = a.size
    qs = np.atleast_1d(np.asarray(qs, dtype=int))
    if np.any(qs < 1) or np.any(qs > n - 1):
        raise DomainError(f"q must lie in 1..{n - 1}")
    top = a[: qs.max() + 1]
    bad = top[qs] <= 0
    if strict and bad.any():
        raise DegenerateDataError("threshold order statistic is not positive")
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.log(np.where(top > 0, top, np.nan))
        h = np.cumsum(logs)[qs - 1] / qs - logs[qs]
        est = np.where(h > 0, 1.0 / h, np.inf)
    return np.where(bad, np.nan, est)


def hill_estimate(series, q: int, tail: str = "abs") -> float:
    return float(hill_estimates(series, [q], tail)[0])


def _mse_ignoring_nan(values: np.ndarray, truth: float) -> float:
    good = values[~np.isnan(values)]
    return float(np.mean((good - truth) ** 2)) if good.size else math.inf


@dataclass
class QoptResult:
    q_opt: int
    mse: float
    mse_by_q: dict[int, float]
    inapplicable: bool


def hill_qopt_search(
    model,
    q_grid,
    replicates: int,
    seed: int = 0,
    true_alpha: float | None = None,
    cell_id: str | None = None,
    divergence_threshold: float = 5.0,
    tail: str = "abs",
) -> QoptResult:
    """Empirical MSE of the Hill estimator per q; argmin with ties to smaller q.

    Flagged inapplicable for light-tailed innovations (no finite tail index)
    or when even the best MSE exceeds ``divergence_threshold``.
    """
    from .simulate import generate
    from .streams import replicate_streams

    grid = sorted(set(int(q) for q in q_grid))
    if not grid:
        raise DomainError("empty q grid")
    alpha = model.innovation.tail_index if true_alpha is None else true_alpha
    cid = cell_id or f"hill:{json.dumps(model.describe(), sort_keys=True)}"
    est = np.empty((replicates, len(grid)))
    for rep in range(replicates):
        data_rng, _ = replicate_streams(seed, cid, rep)
        est[rep] = hill_estimates(generate(model, data_rng), grid, tail, strict=False)
    mse = np.array([_mse_ignoring_nan(col, alpha) for col in est.T])
    j = int(np.argmin(mse))
    inapplicable = bool(model.innovation.light_tailed or not mse[j] <= divergence_threshold)
    return QoptResult(grid[j], float(mse[j]), dict(zip(grid, map(float, mse))), inapplicable)
