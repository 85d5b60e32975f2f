"""Command-line entry point: ``scanrate <command> [flags]``.

Exit codes: 0 success, 1 estimation/statistics failure, 2 input/parse failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .blockstats import Trajectory, batch_value, trajectory_matrix
from .errors import ParseError, ScanRateError
from .estimators import EstimatorSpec, estimate, scan_bits
from .experiment import (
    ROWS,
    TABLE1_N,
    TABLE2_Q,
    CombinedSpec,
    consistency_sweep,
    rows_to_csv,
    table1,
    table2,
)
from .scanmodel import scan_from_bits
from .simulate import InnovationSpec, ModelSpec, generate
from .sloperegress import build_loglog_sample

EXIT_OK, EXIT_ESTIMATION, EXIT_INPUT = 0, 1, 2


def fmt(v: float) -> str:
    return f"{v:.12g}"


# --- input ----------------------------------------------------------------------


def read_series(path: str) -> np.ndarray:
    """Newline-delimited decimals, or a one-column CSV headed ``value``."""
    try:
        text = sys.stdin.read() if path == "-" else Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    lines = text.splitlines()
    values = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            if any(rest.strip() for rest in lines[lineno:]):
                raise ParseError(f"line {lineno}: empty line inside data", lineno)
            break
        if lineno == 1 and line.lower() == "value":
            continue
        try:
            v = float(line)
        except ValueError:
            raise ParseError(f"line {lineno}: not a number: {line!r}", lineno) from None
        if not math.isfinite(v):
            raise ParseError(f"line {lineno}: non-finite value {line!r}", lineno)
        values.append(v)
    return np.array(values, dtype=float)


def read_config(path: str) -> dict[str, str]:
    """Flat ``key = value`` file; '#' starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ParseError(f"{path}:{lineno}: expected key = value", lineno)
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _csv_ints(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in str(text).split(",") if t.strip())


def _csv_floats(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in str(text).split(",") if t.strip())


def _csv_strs(text: str) -> tuple[str, ...]:
    return tuple(t.strip() for t in str(text).split(",") if t.strip())


# --- spec building --------------------------------------------------------------


def _add_estimator_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--stat", default="mean-squares", help="statistic id, e.g. sum-squares, abs-moment-mean:3, mean")
    p.add_argument("--map", dest="rate_map", default="tail-2", help="rate map id (tail-2, tail-abs-<r>, tail-max, lm-mean, identity)")
    p.add_argument("--method", default="ols-intercept", choices=["ols-intercept", "ols-origin", "lad-intercept"])
    p.add_argument("--trim", type=int, default=1, help="first k used in the regression (n0)")
    p.add_argument("--scan", default=None, choices=["direct", "reverse", "uniform", "uniform-start"])
    p.add_argument("--scans", type=int, default=1, help="number of scans N")
    p.add_argument("--agg", default=None, choices=["none", "mean", "median"])
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--centered", action="store_true", help="regress log|T_k - T_n| on a window k = m..b+m")
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--b", type=int, default=None)
    p.add_argument("--clip", type=_csv_floats, default=None, help="LO,HI clip interval override")
    p.add_argument("--combine-R", dest="combine_r", type=int, default=None,
                   help="median over |x|^r moments r=2..R of the scan medians")


def spec_from_args(args) -> EstimatorSpec:
    scan = args.scan or ("uniform" if args.scans > 1 else "direct")
    agg = args.agg or ("median" if args.scans > 1 else "none")
    seed = args.seed if args.seed is not None or scan in ("direct", "reverse") else 0
    clip = tuple(args.clip) if args.clip else None
    if clip is not None and len(clip) != 2:
        raise ParseError("--clip takes LO,HI")
    return EstimatorSpec(
        statistic=args.stat, rate_map=args.rate_map, method=args.method, trim_n0=args.trim, scan=scan,
        scans=args.scans, seed=seed, aggregation=agg, centered=args.centered, m=args.m, b=args.b, clip=clip,
    )


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", default="iid", choices=["iid", "ar1", "fir", "gaussian-lm", "subordinated", "product-lm"])
    p.add_argument("--innov", default="gaussian", choices=["stable", "cauchy", "gaussian", "pareto", "burr", "burr-logmod"])
    p.add_argument("--alpha", type=float, default=None, help="stable index, or product-model tail index")
    p.add_argument("--skew", type=float, default=0.0)
    p.add_argument("--a", type=float, default=2.0, help="pareto tail index")
    p.add_argument("--c", type=float, default=2.0, help="burr c")
    p.add_argument("--k", type=float, default=0.5, help="burr k")
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--rho", type=float, default=0.0)
    p.add_argument("--coef", type=_csv_floats, default=(1.0,), help="FIR coefficients psi_0,psi_1,...")
    p.add_argument("--hurst", type=float, default=0.5)
    p.add_argument("--h", default="identity", choices=["identity", "hermite2"])
    p.add_argument("--zeta", type=float, default=0.0)
    p.add_argument("--eps", default="stable", choices=["stable", "pareto"])
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--burn-in", dest="burn_in", type=int, default=1000)


def model_from_args(args, n: int | None = None) -> ModelSpec:
    stable_alpha = args.alpha if args.alpha is not None else 2.0
    innovation = InnovationSpec(args.innov, alpha=stable_alpha, skew=args.skew, a=args.a, c=args.c, k=args.k, scale=args.scale)
    return ModelSpec(
        n=args.n if n is None else n, dependence=args.model, innovation=innovation, rho=args.rho,
        coefficients=tuple(args.coef), hurst=args.hurst, h=args.h,
        alpha=args.alpha if args.alpha is not None else 1.5, zeta=args.zeta, eps_family=args.eps, burn_in=args.burn_in,
    )


def _echo(args) -> dict:
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in vars(args).items() if k != "func"}


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# --- commands --------------------------------------------------------------------


def cmd_estimate(args) -> int:
    x = read_series(args.input)
    if x.size < 8:
        raise ParseError(f"need at least 8 observations, got {x.size}")
    spec = spec_from_args(args)
    if args.combine_r:
        from .estimators import combined_median_details

        value, per_r = combined_median_details(x, spec, args.combine_r)
        payload = {"estimate": float(fmt(value)), "per_r": [float(fmt(v)) for v in per_r], "spec": spec.to_dict(), "config": _echo(args)}
        print(f"estimate: {fmt(value)}")
        print("per-r: " + " ".join(fmt(v) for v in per_r))
        if args.json:
            Path(args.json).write_text(json.dumps(payload, indent=2))
        return EXIT_OK
    report = estimate(x, spec)
    report.extra["config"] = _echo(args)
    report.extra["n"] = int(x.size)
    ps = report.per_scan
    print(f"estimate: {fmt(report.estimate)}")
    print(f"scans: {ps.size} (excluded {report.excluded})  min {fmt(ps.min())}  median {fmt(np.median(ps))}  max {fmt(ps.max())}")
    print(f"clipped fraction: {fmt(report.clipped_fraction)}")
    print("spec: " + json.dumps(spec.to_dict(), sort_keys=True))
    if args.csv:
        print(report.CSV_HEADER)
        print(report.to_csv_row())
    if args.json:
        Path(args.json).write_text(report.to_json())
    return EXIT_OK


def cmd_diagnose(args) -> int:
    x = read_series(args.input)
    if x.size < 2:
        raise ParseError("need at least 2 observations")
    scan = args.scan or "direct"
    spec = EstimatorSpec(statistic=args.stat, scan=scan, seed=args.seed, rate_map="identity")
    bits = scan_bits(spec, x.size)[:1]
    values = trajectory_matrix(x, bits, spec.stat)[0]
    traj = Trajectory(values, scan_from_bits(bits[0]), spec.stat)
    center = batch_value(x, spec.stat) if args.centered else None
    sample = build_loglog_sample(values, args.trim, center=center, provenance=f"{spec.stat.id}@{traj.scan}", max_drop_fraction=None)
    _write(args.out, sample.to_csv())
    if args.trajectory_out:
        Path(args.trajectory_out).write_text(traj.to_csv())
    return EXIT_OK


def cmd_simulate(args) -> int:
    model = model_from_args(args)
    seed = 0 if args.seed is None else args.seed
    x = generate(model, np.random.default_rng(seed))
    _write(args.out, "".join(fmt(v) + "\n" for v in x))
    if args.out and args.out != "-":
        meta = {"model": model.describe(), "seed": seed, "generator": "numpy PCG64 default_rng(seed)", "config": _echo(args)}
        Path(args.out + ".json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    return EXIT_OK


def _table_outputs(args, rows, meta) -> None:
    _write(args.out, rows_to_csv(rows))
    if args.json:
        payload = {"meta": meta, "rows": [r.to_dict() for r in rows]}
        Path(args.json).write_text(json.dumps(payload, indent=2))


def cmd_table1(args) -> int:
    rows = table1(
        panel=args.panel, rows=_csv_strs(args.rows), n_list=_csv_ints(args.n_list), replicates=args.reps,
        seed=args.seed, n=args.n, scan_policy=args.scan_policy, workers=args.threads,
    )
    meta = {"scan_policy": args.scan_policy, "nested_scans": True, "config": _echo(args)}
    _table_outputs(args, rows, meta)
    return EXIT_ESTIMATION if any(r.result.cell_failed for r in rows) else EXIT_OK


def cmd_table2(args) -> int:
    res = table2(
        panel=args.panel, rows=_csv_strs(args.rows), q_list=_csv_ints(args.q), replicates=args.reps, seed=args.seed,
        n=args.n, tail=args.tail,
    )
    rows = [r for row in res.values() for r in row.rows]
    meta = {"tail": args.tail, "q_opt": {k: v.q_opt for k, v in res.items()},
            "not_applicable": {k: v.not_applicable for k, v in res.items()}, "config": _echo(args)}
    _table_outputs(args, rows, meta)
    return EXIT_ESTIMATION if any(r.result.cell_failed and not r.not_applicable for r in rows) else EXIT_OK


def cmd_sweep(args) -> int:
    model = model_from_args(args)
    spec = spec_from_args(args)
    estimator = CombinedSpec(spec, args.combine_r) if args.combine_r else spec
    truth = args.truth if args.truth is not None else model.innovation.tail_index
    errors = consistency_sweep(model, estimator, _csv_ints(args.n_grid), args.reps, args.seed or 0, truth, args.threads)
    buf = ["n,median_abs_error\n"] + [f"{n},{fmt(e)}\n" for n, e in errors.items()]
    _write(args.out, "".join(buf))
    return EXIT_OK


# --- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scanrate", description="Rate estimation by log-log regression along scans.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="flat key = value file; flags override it")

    p = sub.add_parser("estimate", help="estimate a rate parameter from a data file")
    p.add_argument("input")
    _add_estimator_flags(p)
    p.add_argument("--json", default=None, help="write the full report here")
    p.add_argument("--csv", action="store_true", help="also print a one-line CSV row")
    common(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("diagnose", help="export the log-log scatter of one scan")
    p.add_argument("input")
    p.add_argument("--stat", default="mean-squares")
    p.add_argument("--scan", default="direct", choices=["direct", "reverse", "uniform", "uniform-start"])
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--trim", type=int, default=1)
    p.add_argument("--centered", action="store_true", help="use log|T_k - T_n|")
    p.add_argument("--out", default=None, help="CSV k,log_k,Y_k,retained (stdout by default)")
    p.add_argument("--trajectory-out", dest="trajectory_out", default=None, help="CSV k,block_start,T_k")
    common(p)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("simulate", help="simulate a series from a data model")
    _add_model_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="output file (JSON sidecar at OUT.json)")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("table1", help="Monte Carlo MSEs of alpha-hat, alpha* and alpha**")
    p.add_argument("--panel", default="a", choices=["a", "b", "c"])
    p.add_argument("--rows", default="i,ii,iii,iv", help=f"comma list from {','.join(ROWS)}")
    p.add_argument("--n-list", dest="n_list", default=",".join(map(str, TABLE1_N)), help="scan counts N")
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--scan-policy", dest="scan_policy", default="uniform", choices=["uniform", "uniform-start"])
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", default=None)
    p.add_argument("--json", default=None)
    common(p)
    p.set_defaults(func=cmd_table1)

    p = sub.add_parser("table2", help="Monte Carlo MSEs of the Hill estimator")
    p.add_argument("--panel", default="a", choices=["a", "b", "c"])
    p.add_argument("--rows", default="i,ii,iii,iv")
    p.add_argument("--q", default=",".join(map(str, TABLE2_Q)))
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--tail", default="upper", choices=["upper", "abs"])
    p.add_argument("--out", default=None)
    p.add_argument("--json", default=None)
    common(p)
    p.set_defaults(func=cmd_table2)

    p = sub.add_parser("sweep", help="median absolute error over an increasing n grid")
    _add_model_flags(p)
    _add_estimator_flags(p)
    p.add_argument("--n-grid", dest="n_grid", default="250,1000,4000")
    p.add_argument("--reps", type=int, default=50)
    p.add_argument("--truth", type=float, default=None)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", default=None)
    common(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest: a for a in sub._actions}
        for a in sub._actions:
            for opt in a.option_strings:
                known.setdefault(opt.lstrip("-").replace("-", "_"), a)
        defaults = {}
        for key, raw in read_config(args.config).items():
            if key not in known:
                raise ParseError(f"{args.config}: unknown key {key!r}")
            action = known[key]
            if action.const is True and action.nargs == 0:
                defaults[action.dest] = raw.lower() in ("1", "true", "yes", "on")
            else:
                try:
                    defaults[action.dest] = action.type(raw) if action.type else raw
                except ValueError as exc:
                    raise ParseError(f"{args.config}: bad value for {key!r}: {raw!r}") from exc
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = _apply_config(parser, argv)
        return args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ScanRateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION


if __name__ == "__main__":
    sys.exit(main())
