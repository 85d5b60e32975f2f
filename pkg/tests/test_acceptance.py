"""Acceptance criteria 1-10 at their stated tolerances.

Each test records one PASS/FAIL line; the lines are printed in the pytest
terminal summary, or directly when this file is run as a script.
"""

from __future__ import annotations

import io
import itertools
import math
import time
from collections import Counter
from contextlib import redirect_stdout
from math import comb

import numpy as np
import pytest
from scipy import stats

from oracles import lad_pair_search, ols_normal_equations
from scanrate.blockstats import IncrementalStatistic, Statistic, Trajectory, trajectory_batch_oracle, trajectory_matrix
from scanrate.cli import main as cli_main
from scanrate.estimators import EstimatorSpec, estimate, diverging_transform
from scanrate.experiment import (
    REFERENCE_TABLE1,
    REFERENCE_TABLE2,
    consistency_sweep,
    rows_to_csv,
    run_cell,
    CellSpec,
    summarize,
    table1,
    table2,
)
from scanrate.ratemaps import get_map, identity_map, lm_mean_map, roundtrip_check, tail_max_map
from scanrate.scanmodel import block_starts, enumerate_scans, random_shrink_bits, scan_from_bits
from scanrate.simulate import InnovationSpec, ModelSpec
from scanrate.sloperegress import LogLogSample, fit_lad_intercept, fit_ols_intercept, fit_ols_origin, fit_windowed

SEED = 11
RESULTS: list[str] = []


def record(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


# 1 ------------------------------------------------------------------------------


def test_criterion_01_scan_combinatorics():
    t0 = time.perf_counter()
    bad = []
    for n in range(1, 13):
        scans = enumerate_scans(n)
        if len(scans) != 2 ** (n - 1) or len({s.shrinks for s in scans}) != len(scans):
            bad.append(f"n={n} count")
        tally = Counter((b.start, b.size) for s in scans for b in s.blocks())
        for k in range(1, n + 1):
            for i in range(1, n - k + 2):
                if tally[(i, k)] != comb(n - k, i - 1) * 2 ** (k - 1):
                    bad.append(f"n={n} i={i} k={k}")
    elapsed = time.perf_counter() - t0
    record(1, not bad and elapsed < 10, f"n=1..12 exact counts, {len(bad)} mismatches, {elapsed:.1f}s")


# 2 ------------------------------------------------------------------------------


def test_criterion_02_uniform_generator():
    t0 = time.perf_counter()
    n, draws = 6, 64_000
    bits = random_shrink_bits(n, draws, np.random.default_rng(SEED))
    codes = bits.astype(np.int64) @ (1 << np.arange(n - 1))
    counts = np.bincount(codes, minlength=32)
    chi_scans = stats.chisquare(counts).statistic
    limit31 = stats.chi2.ppf(0.999, 31)
    starts = block_starts(bits)[:, 2] - 1  # size-3 block, 0-based start
    observed = np.bincount(starts, minlength=4)
    expected = draws * stats.binom.pmf(np.arange(4), 3, 0.5)
    chi_start = float(((observed - expected) ** 2 / expected).sum())
    limit3 = stats.chi2.ppf(0.999, 3)
    elapsed = time.perf_counter() - t0
    ok = chi_scans < limit31 and chi_start < limit3 and elapsed < 10
    record(2, ok, f"chi2 scans {chi_scans:.1f} < {limit31:.1f}; size-3 start chi2 {chi_start:.2f} < {limit3:.2f}")


# 3 ------------------------------------------------------------------------------


STATS = ["sum-squares", "mean-squares", "abs-moment-sum:3", "abs-moment-mean:4", "mean", "max", "min", "range"]


def _relative_deviation(values, oracle, magnitude):
    return float(np.max(np.abs(values - oracle) / np.maximum(magnitude, 1e-300)))


def test_criterion_03_incremental_batch():
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for trial in range(200):
        n = 500
        family = trial % 3
        x = [rng.standard_normal(n), rng.standard_cauchy(n), rng.pareto(1.5, n) - 2][family]
        stat = Statistic.parse(STATS[trial % len(STATS)])
        b = random_shrink_bits(n, 1, rng)
        scan = scan_from_bits(b[0])
        oracle = trajectory_batch_oracle(x, scan, stat)
        # signed means compare against the same mean of |x|, the natural scale of their rounding error
        magnitude = trajectory_batch_oracle(np.abs(x), scan, stat) if stat.kind == "mean" else np.abs(oracle)
        worst = max(worst, _relative_deviation(trajectory_matrix(x, b, stat)[0], oracle, magnitude))
        blocks = scan.blocks()
        inc = IncrementalStatistic(stat, x[blocks[0].start - 1])
        streamed = [inc.value()]
        for prev, blk in zip(blocks, blocks[1:]):
            inc.extend_left(x[blk.start - 1]) if blk.start < prev.start else inc.extend_right(x[blk.stop - 1])
            streamed.append(inc.value())
        worst = max(worst, _relative_deviation(np.array(streamed), oracle, magnitude))
    elapsed = time.perf_counter() - t0
    record(3, worst <= 1e-9 and elapsed < 10, f"max relative deviation {worst:.2e} <= 1e-9 ({elapsed:.1f}s)")


# 4 ------------------------------------------------------------------------------


def test_criterion_04_regression_oracles():
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for _ in range(100):
        p = int(rng.integers(8, 30))
        ks = np.arange(1, p + 1)
        ys = rng.uniform(-2, 2) * np.log(ks) + rng.uniform(-3, 3) + rng.standard_t(2, p)
        s = LogLogSample(ks, ys)
        ref_slope, ref_icpt = ols_normal_equations(np.log(ks), ys)
        f = fit_ols_intercept(s)
        worst = max(worst, abs(f.slope - ref_slope), abs(f.intercept - ref_icpt))
        worst = max(worst, abs(fit_ols_origin(s).slope - ols_normal_equations(np.log(ks), ys, False)[0]))
        m = int(rng.integers(1, p // 2))
        b = int(rng.integers(2, p - m + 1))
        w = (ks >= m) & (ks <= b + m)
        worst = max(worst, abs(fit_windowed(s, m, b).slope - ols_normal_equations(np.log(ks[w]), ys[w])[0]))
        lad = fit_lad_intercept(s)
        worst = max(worst, abs(lad.residual_sum - lad_pair_search(np.log(ks), ys)))
    elapsed = time.perf_counter() - t0
    record(4, worst <= 1e-10 and elapsed < 10, f"max deviation from oracles {worst:.2e} <= 1e-10 ({elapsed:.1f}s)")


# 5 ------------------------------------------------------------------------------


def _within(mse: float, ref: float | None) -> bool:
    if ref is None:  # published as < 0.0005
        return mse <= 0.005
    return ref / 2.5 <= mse <= ref * 2.5


@pytest.mark.slow
def test_criterion_05_table1():
    t0 = time.perf_counter()
    rows = table1("a", ("i", "ii", "iii", "iv", "v", "vi", "vii"), n_list=(100,), replicates=100, seed=SEED)
    elapsed = time.perf_counter() - t0
    failures, cells = [], []
    for r in rows:
        ref = REFERENCE_TABLE1[("a", r.row)]
        key = r.estimator if r.estimator == "alpha_hat" else f"{r.estimator}_100"
        mse = r.result.mse
        if r.row in ("v", "vi", "vii"):
            ok = mse <= 1
        else:
            ok = _within(mse, ref[key])
        cells.append(f"{r.row}/{r.estimator}={mse:.4f}" + ("" if ok else f"(ref {ref[key]})"))
        if not ok:
            failures.append(f"{r.row}/{r.estimator}")
    # informational: the start-uniform scan policy on the rows that are checked quantitatively
    alt = table1("a", ("i", "ii", "iii", "iv"), n_list=(100,), replicates=100, seed=SEED,
                 scan_policy="uniform-start", include_hat=False)
    print("uniform-start policy: " + " ".join(f"{r.row}/{r.estimator}={r.result.mse:.4f}" for r in alt))
    print("uniform policy: " + " ".join(cells))
    ok = not failures and elapsed < 600
    record(5, ok, f"panel a, {len(rows)} cells, failing: {', '.join(failures) or 'none'} ({elapsed:.0f}s)")


# 6 ------------------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_06_table2():
    t0 = time.perf_counter()
    res = table2("a", ("i", "ii", "iii", "iv"), q_list=(100, 200), replicates=100, seed=SEED)
    elapsed = time.perf_counter() - t0
    failures, cells = [], []
    for row in ("i", "ii", "iii"):
        for tr in res[row].rows:
            if tr.estimator != "hill":
                continue
            ref = REFERENCE_TABLE2[("a", row)]["mse"][tr.q]
            ok = _within(tr.result.mse, ref)
            cells.append(f"{row}/q={tr.q}={tr.result.mse:.4f}")
            if not ok:
                failures.append(f"{row}/q={tr.q} ({tr.result.mse:.4f} vs {ref})")
    if not res["iv"].not_applicable:
        failures.append("row iv not flagged")
    ok = not failures and elapsed < 300
    record(6, ok, f"{' '.join(cells)}; iv n/a={res['iv'].not_applicable}; failing: {', '.join(failures) or 'none'}")


# 7 ------------------------------------------------------------------------------


def _nonincreasing_with_slack(values, slack=0.10):
    return all(b <= a * (1 + slack) for a, b in zip(values, values[1:]))


@pytest.mark.slow
def test_criterion_07_consistency():
    model = ModelSpec(250, "iid", InnovationSpec("cauchy"))
    grid = (250, 1000, 4000)
    hat = consistency_sweep(model, EstimatorSpec(), grid, 50, seed=SEED, true_value=1.0)
    star = consistency_sweep(model, EstimatorSpec(scan="uniform", scans=50, aggregation="median"), grid, 50,
                             seed=SEED, true_value=1.0)
    ok = _nonincreasing_with_slack(list(hat.values())) and _nonincreasing_with_slack(list(star.values()))
    fmt = lambda d: "/".join(f"{v:.3f}" for v in d.values())
    record(7, ok, f"median |alpha-1| at n=250/1000/4000: single {fmt(hat)}, N=50 median {fmt(star)}")


# 8 ------------------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_08_long_memory():
    t0 = time.perf_counter()
    model = ModelSpec(4096, "gaussian-lm", hurst=0.9)
    spec = EstimatorSpec(statistic="mean", rate_map="lm-mean", centered=True, scan="uniform", scans=50,
                         aggregation="median")
    r = run_cell(CellSpec(model, spec, 50, 0.2, seed=SEED, cell_id="fgn:H=0.9:n=4096"))
    med = float(np.median(r.estimates))
    elapsed = time.perf_counter() - t0
    record(8, abs(med - 0.2) <= 0.15 and elapsed < 300, f"median q*beta estimate {med:.3f} (target 0.2 +- 0.15, {elapsed:.0f}s)")


# 9 ------------------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_09_product_model():
    spec = EstimatorSpec(statistic="sum-squares", rate_map="tail-2", scan="uniform", scans=50, aggregation="median")
    medians = []
    for zeta in (0.0, 0.4, 0.8):
        model = ModelSpec(2**14, "product-lm", alpha=1.5, zeta=zeta)
        r = run_cell(CellSpec(model, spec, 50, 1.5, seed=SEED, cell_id=f"product:zeta={zeta}"))
        medians.append(float(np.median(r.estimates)))
    spread = max(medians) - min(medians)
    ok = spread <= 0.25 and all(abs(m - 1.5) <= 0.3 for m in medians)
    record(9, ok, "medians for zeta=0/0.4/0.8: " + "/".join(f"{m:.3f}" for m in medians) + f", spread {spread:.3f}")


# 10 -----------------------------------------------------------------------------


def test_criterion_10_invariants(tmp_path):
    rng = np.random.default_rng(SEED)
    problems = []

    # scale invariance of the intercept pipeline
    x = rng.standard_cauchy(1000)
    for stat, rmap in (("mean-squares", "tail-2"), ("sum-squares", "tail-2"), ("abs-moment-mean:3", "tail-abs-3")):
        spec = EstimatorSpec(statistic=stat, rate_map=rmap, scan="uniform", scans=20, aggregation="median", seed=3)
        a, b = estimate(x, spec).per_scan, estimate(7.3 * x, spec).per_scan
        if np.max(np.abs(a - b)) > 1e-10:
            problems.append(f"scale {stat}")

    # slope shift identity under multiplication by k^-G
    ks = np.arange(1, 301, dtype=float)
    stat = Statistic("mean-squares")
    shift_err = 0.0
    for _ in range(50):
        traj = Trajectory(np.exp(rng.standard_normal(300)), None, stat)
        g = float(rng.uniform(-2, 2))
        base = fit_ols_intercept(LogLogSample(ks.astype(int), np.log(traj.values))).slope
        moved = diverging_transform(traj, g)
        new = fit_ols_intercept(LogLogSample(ks.astype(int), np.log(moved.values))).slope
        shift_err = max(shift_err, abs(new - base + g))
    if shift_err > 1e-10:
        problems.append(f"slope shift {shift_err:.1e}")

    # rate-map round trips
    maps = [(get_map("tail-2", "average"), np.linspace(0.05, 2, 40)), (get_map("tail-2", "sum"), np.linspace(0.05, 2, 40)),
            (get_map("tail-abs-3", "average"), np.linspace(0.05, 2, 40)), (tail_max_map(), np.linspace(0.05, 2, 40)),
            (lm_mean_map(), np.linspace(0.05, 1.95, 40)), (identity_map(), np.linspace(-3, 3, 40))]
    rt = max(roundtrip_check(m, g) for m, g in maps)
    if rt > 1e-12:
        problems.append(f"round trip {rt:.1e}")

    # MSE decomposition
    decomp = 0.0
    for _ in range(20):
        r = summarize(rng.standard_cauchy(100) * 0.1 + 1.2, 1.0)
        decomp = max(decomp, abs(r.mse - (r.bias**2 + r.variance)))
    if decomp > 1e-10:
        problems.append(f"MSE decomposition {decomp:.1e}")

    # byte-identical reruns
    csv_a = rows_to_csv(table1("a", ("i",), n_list=(20,), replicates=10, seed=SEED))
    csv_b = rows_to_csv(table1("a", ("i",), n_list=(20,), replicates=10, seed=SEED))
    outs = []
    for name in ("s1.txt", "s2.txt"):
        path = tmp_path / name
        with redirect_stdout(io.StringIO()):
            cli_main(["simulate", "--model", "ar1", "--rho", "0.1", "--innov", "cauchy", "--n", "200", "--seed",
                      str(SEED), "--out", str(path)])
        outs.append(path.read_bytes())
    if csv_a != csv_b or outs[0] != outs[1]:
        problems.append("reruns differ")

    record(10, not problems, f"scale, slope shift {shift_err:.1e}, round trip {rt:.1e}, MSE identity {decomp:.1e}, "
           f"reruns identical; problems: {', '.join(problems) or 'none'}")


if __name__ == "__main__":
    import pathlib
    import tempfile

    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_criterion")]
    for test in tests:
        try:
            if "tmp_path" in test.__code__.co_varnames[: test.__code__.co_argcount]:
                with tempfile.TemporaryDirectory() as d:
                    test(pathlib.Path(d))
            else:
                test()
        except AssertionError:
            pass
    print("\n".join(["", "summary:", *RESULTS]))
