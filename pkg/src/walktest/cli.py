"""Command-line front end.

Subcommands::

    walktest test       per-statistic permutation tests for every covariate
    walktest combine    min-p combined test with optional Bonferroni
    walktest bench      synthetic power benchmark
    walktest calibrate  type-I error check on null synthetic data
    walktest quantile   tail probabilities and quantiles

Exit codes: 0 success, 2 invalid input, 3 numerically degenerate outcome.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import re
import sys
from pathlib import Path


from . import __version__, dist, synth
from .cumproc import cumulative, sort_permutation, write_curve
from .data import ArmPair, DataError, DoseEncoding, ingest_csv
from .mc import (
    DEFAULT_COMBINED,
    McConfig,
    apply_correction,
    config_hash,
    default_threads,
    envelope,
    evaluate_covariates,
    report_meta,
    reports_to_csv,
    reports_to_json,
)
from .preprocess import prepare
from .stats import StatisticKind

EXIT_OK, EXIT_INPUT, EXIT_DEGENERATE = 0, 2, 3


class UsageError(Exception):
    pass


def _stat_list(text):
    try:
        return tuple(StatisticKind.parse(s) for s in text.split(",") if s.strip())
    except ValueError as e:
        raise UsageError(str(e)) from None


def _threads(value):
    if value is None:
        return default_threads()
    return value if value > 0 else (os.cpu_count() or 1)


def _write(path, text):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _file_digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


def _add_mc_args(p, default_stats):
    p.add_argument("--m", type=int, default=10_000, help="Monte-Carlo permutations (>= 100)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=("strict", "smooth"), default="strict",
                   help="strict: #{S>V}/M; smooth: (1+#{S>=V})/(M+1)")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads, 0 = all cores (default from WALKTEST_THREADS or 1)")
    p.add_argument("--stats", "--stat", dest="stats", default=",".join(k.value for k in default_stats),
                   help="comma-separated statistics")


def _add_data_args(p):
    p.add_argument("input", help="CSV file with a header row")
    p.add_argument("--treatment-col", default="treatment")
    p.add_argument("--response-col", default="response")
    p.add_argument("--covariates", default=None, help="comma-separated covariate columns (default: all others)")
    p.add_argument("--arm-pair", default=None, metavar="A,B", help="compare arm A (T=+1) with arm B (T=-1)")
    p.add_argument("--dose-encoding", default=None, metavar="LABEL=VALUE,...")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--correction", choices=("none", "bonferroni"), default="none")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--no-intercept", action="store_true", help="MoLin without intercept")
    p.add_argument("--output", "-o", default=None, help="report path (default stdout)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--emit-curves", default=None, metavar="DIR",
                   help="write each covariate's path and a 2.5/97.5%% permutation envelope as CSV")


def _load(args):
    pair = None
    if args.arm_pair:
        parts = args.arm_pair.split(",")
        if len(parts) != 2:
            raise UsageError("--arm-pair takes two labels separated by a comma")
        pair = ArmPair(parts[0].strip(), parts[1].strip())
    enc = DoseEncoding.parse(args.dose_encoding) if args.dose_encoding else None
    cols = [c.strip() for c in args.covariates.split(",")] if args.covariates else None
    return ingest_csv(args.input, treatment_col=args.treatment_col, response_col=args.response_col,
                      covariate_cols=cols, arm_pair=pair, dose_encoding=enc, delimiter=args.delimiter)


def _safe(name):
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name) or "covariate"


def _analyse(args, combine):
    ds = _load(args)
    kinds = _stat_list(args.stats)
    if not kinds:
        raise UsageError("no statistics given")
    if combine and len(kinds) < 2:
        raise UsageError("the combined test needs at least two statistics")
    cfg = McConfig(m=args.m, seed=args.seed, stats=kinds, mode=args.mode, alpha=args.alpha,
                   molin_intercept=not args.no_intercept, threads=_threads(args.threads))
    y = prepare(ds, centered=True)
    y_raw = prepare(ds, centered=False) if any(k.uses_uncentered for k in kinds) else None
    xs = [ds.covariates[:, j] for j in range(ds.d)]
    reports, null = evaluate_covariates(y, xs, kinds, cfg, y_raw=y_raw, names=list(ds.covariate_names),
                                        combine=combine, keep_paths=bool(args.emit_curves))
    apply_correction(reports, args.correction, args.alpha)
    extra = {
        "command": "combine" if combine else "test",
        "input_sha256": _file_digest(args.input),
        "treatment_col": args.treatment_col,
        "response_col": args.response_col,
        "covariates": list(ds.covariate_names),
        "arm_pair": args.arm_pair,
        "dose_encoding": args.dose_encoding,
        "correction": args.correction,
    }
    meta = report_meta(cfg, extra)
    meta.update({k: v for k, v in extra.items() if k != "covariates"})
    text = reports_to_json(reports, meta) if args.format == "json" else reports_to_csv(reports)
    _write(args.output, text)
    if args.emit_curves:
        out = Path(args.emit_curves)
        out.mkdir(parents=True, exist_ok=True)
        lo, hi = envelope(null.paths)
        for j, name in enumerate(ds.covariate_names):
            proc = cumulative(y, sort_permutation(xs[j]))
            write_curve(out / f"{_safe(name)}_curve.csv", proc, lo, hi)
    if all(r.degenerate for rep in reports for r in rep.results):
        print("error: outcome is constant; every statistic is degenerate", file=sys.stderr)
        return EXIT_DEGENERATE
    return EXIT_OK


def cmd_test(args):
    return _analyse(args, combine=False)


def cmd_combine(args):
    return _analyse(args, combine=True)


def _split(text, parse=str):
    return [parse(s.strip()) for s in text.split(",") if s.strip()]


def cmd_bench(args):
    try:
        models = [synth.canonical_model(m) for m in _split(args.models)]
    except ValueError as e:
        raise UsageError(str(e)) from None
    axes = _split(args.axes)
    for a in axes:
        if a not in synth.AXES:
            raise UsageError(f"unknown axis {a!r}; valid: {', '.join(synth.AXES)}")
    kinds = _stat_list(args.stats)
    comb = _stat_list(args.combine) if args.combine else None
    cfg = McConfig(m=args.m, seed=args.seed, mode=args.mode, threads=_threads(args.threads))
    grid = _split(args.grid, float) if args.grid else None
    reports = []
    for model in models:
        for axis in axes:
            try:
                synth.axis_spec(model, axis, 1.0, args.n)
            except ValueError:
                continue  # axis not defined for this model
            g = grid
            if g is not None and axis == "decoy":
                g = [int(v) for v in g]
            reports.append(synth.run_axis(model, axis, g, stats=kinds, reps=args.reps, cfg=cfg, n=args.n,
                                          combine=comb))
    if not reports:
        raise UsageError("no valid model/axis combination selected")
    meta = {
        "version": __version__, "seed": args.seed, "m": args.m, "mode": args.mode, "reps": args.reps,
        "n": args.n, "stats": [k.value for k in kinds], "combined": [k.value for k in comb or ()],
        "models": models, "axes": axes, "grid": grid, "w2_noise": synth.W2_NOISE,
    }
    meta["config_hash"] = config_hash(meta)
    _write(args.output, synth.power_csv(reports))
    if args.summary:
        _write(args.summary, synth.power_summary_json(reports, meta))
    return EXIT_OK


def cmd_calibrate(args):
    kinds = _stat_list(args.stats)
    comb = _stat_list(args.combine) if args.combine else None
    cfg = McConfig(m=args.m, seed=args.seed, mode=args.mode, threads=_threads(args.threads))
    cal = synth.null_calibration(kinds, comb, reps=args.reps, cfg=cfg, n=args.n, alpha=args.alpha)
    doc = cal.to_dict()
    doc["meta"] = {"version": __version__, **doc["meta"], "reps": args.reps,
                   "stats": [k.value for k in kinds], "combined": [k.value for k in comb or ()]}
    doc["meta"]["config_hash"] = config_hash(doc["meta"])
    _write(args.output, json.dumps(doc, indent=2) + "\n")
    if args.histogram:
        _write(args.histogram, cal.histogram_csv())
    return EXIT_OK


def cmd_quantile(args):
    try:
        kind = dist.TailKind.parse(args.kind)
    except ValueError as e:
        raise UsageError(str(e)) from None
    if args.tail is not None:
        print(repr(float(dist.tail(kind, args.tail))))
        return EXIT_OK
    if args.p is None:
        raise UsageError("give --p (quantile) or --tail ALPHA (tail probability)")
    try:
        print(repr(dist.quantile(kind, args.p)))
    except ValueError as e:
        raise UsageError(str(e)) from None
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="walktest", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=f"walktest {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("test", help="per-statistic permutation tests")
    _add_data_args(p)
    _add_mc_args(p, DEFAULT_COMBINED)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("combine", help="min-p combined test")
    _add_data_args(p)
    _add_mc_args(p, DEFAULT_COMBINED)
    p.set_defaults(func=cmd_combine)

    p = sub.add_parser("bench", help="synthetic power benchmark")
    _add_mc_args(p, synth.BENCH_STATS)
    p.set_defaults(m=1000)
    p.add_argument("--models", default=",".join(synth.MODELS))
    p.add_argument("--axes", default="noise,w1,decoy")
    p.add_argument("--grid", default=None, help="override the grid of every selected axis")
    p.add_argument("--reps", type=int, default=96)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--combine", default=",".join(k.value for k in DEFAULT_COMBINED),
                   help="statistics of the Comb column ('' to skip)")
    p.add_argument("--output", "-o", default=None, help="power table CSV (default stdout)")
    p.add_argument("--summary", default=None, help="normalized-area summary JSON")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("calibrate", help="type-I error on null data")
    _add_mc_args(p, synth.ALL_STATS)
    p.set_defaults(m=2000)
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--combine", default=",".join(k.value for k in DEFAULT_COMBINED))
    p.add_argument("--output", "-o", default=None)
    p.add_argument("--histogram", default=None, help="CSV of p-value histograms")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("quantile", help="tail quantiles of the Brownian maxima")
    p.add_argument("kind", help="BrownianMax, BridgeMax or ExcursionMax")
    p.add_argument("--p", type=float, default=None, help="upper-tail probability")
    p.add_argument("--tail", type=float, default=None, metavar="ALPHA", help="print P[stat > ALPHA] instead")
    p.set_defaults(func=cmd_quantile)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_INPUT if e.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (UsageError, DataError, ValueError, FileNotFoundError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
