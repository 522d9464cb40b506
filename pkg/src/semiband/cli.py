"""Command-line entry point: simulate, benchmark, verify, counterexample, render."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

from .analytics import CHECK_COLUMNS, analyze_scan, counterexample_scan
from .harness import (
    BENCHMARK_COLUMNS,
    ConfigError,
    benchmark_resampling,
    load_config,
    run_experiment,
    write_rows,
)
from .perturbation import PerturbationSpec
from .render import render_csv
from .sweeps import SUITES, run_suite

log = logging.getLogger("semiband")


def _setup_logging():
    level = os.environ.get("SEMIBAND_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _ints(text):
    return [int(v) for v in text.split(",") if v]


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.base_seed = args.seed
    out = Path(args.out or cfg.output_path)
    summary = run_experiment(cfg, jobs=args.jobs, out_dir=out,
                             base_dir=Path(args.config).resolve().parent)
    print(f"mean pseudo-regret {summary.mean_regret:.4f} +- {summary.std_regret:.4f} "
          f"(bound {summary.bound:.4f}); mean resamples {summary.mean_resamples:.3f}; "
          f"cap events {summary.cap_events}; output in {out}")
    return 0


def cmd_benchmark(args) -> int:
    spec = PerturbationSpec(args.family, args.alpha)
    rows = benchmark_resampling(_ints(args.d), _ints(args.m), args.rounds, spec,
                                seed=args.seed or 0, spread=args.spread,
                                lazy=not args.literal_gr)
    out = Path(args.out or "benchmark") / "benchmark.csv"
    write_rows(out, BENCHMARK_COLUMNS, rows)
    for r in rows:
        print(f"d={r['d']:>5} m={r['m']:>3} {r['estimator']:>3}: mean M_t "
              f"{r['mean_resamples']:.3f} +- {r['se_resamples']:.3f} (bound {r['bound']:.3f}), "
              f"{1e3 * r['seconds_per_round']:.3f} ms/round")
    return 0


def cmd_verify(args) -> int:
    rows = run_suite(args.suite, seed=args.seed or 0, instances=args.instances, cap=args.cap,
                     n_calls=args.calls)
    out = Path(args.out or "verify") / f"verify_{args.suite}.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CHECK_COLUMNS)
        for r in rows:
            w.writerow(r.as_row())
    bad = [r for r in rows if not r.ok]
    print(f"{args.suite}: {len(rows) - len(bad)}/{len(rows)} checks ok; report {out}")
    for r in bad[:20]:
        print(f"  FAILED {r.check} instance={r.instance_id} i={r.i} lhs={r.lhs:.6g} rhs={r.rhs:.6g}")
    return 1 if bad or not rows else 0


def cmd_counterexample(args) -> int:
    grid, vals, errs = counterexample_scan(args.lo, args.hi, args.step)
    info = analyze_scan(grid, vals, errs)
    out = Path(args.out or "counterexample") / "ratio_scan.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lambda_q0", "ratio", "err_estimate"])
        for g, v, e in zip(grid, vals, errs):
            w.writerow([f"{g:.2f}", repr(float(v)), repr(float(e))])
    print(json.dumps(info, indent=2))
    nonmono = info["strict_rise"] and info["strict_fall"] and info["exceeds_base"]
    print("non-monotone: " + ("yes" if nonmono else "no") + f"; scan in {out}")
    return 0 if nonmono else 1


def cmd_render(args) -> int:
    for p in args.csv:
        print(render_csv(p, None if len(args.csv) > 1 else args.output))
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="base seed")
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--jobs", type=int, default=1, help="worker processes")

    ap = argparse.ArgumentParser(prog="semiband", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="run FTPL replications from a JSON config")
    p.add_argument("--config", required=True)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("benchmark", parents=[common], help="resampling cost per round, GR vs CGR")
    p.add_argument("--config", default=None, help="unused; accepted for symmetry")
    p.add_argument("--d", default="64,1024,4096")
    p.add_argument("--m", default="1,8,64")
    p.add_argument("--rounds", type=int, default=1000)
    p.add_argument("--family", default="frechet")
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--spread", type=float, default=1.0,
                   help="scaled cumulative losses span [0, spread]")
    p.add_argument("--literal-gr", action="store_true",
                   help="draw the full perturbation vector on every GR iteration")
    p.set_defaults(fn=cmd_benchmark)

    p = sub.add_parser("verify", parents=[common], help="run a verification suite")
    p.add_argument("suite", choices=SUITES)
    p.add_argument("--config", default=None, help="unused; accepted for symmetry")
    p.add_argument("--instances", type=int, default=None)
    p.add_argument("--calls", type=int, default=None, help="estimator calls per arm")
    p.add_argument("--cap", type=int, default=None, help="resampling iteration cap")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("counterexample", parents=[common], help="scan the J4/J3 ratio")
    p.add_argument("--lo", type=float, default=0.0)
    p.add_argument("--hi", type=float, default=5.0)
    p.add_argument("--step", type=float, default=0.05)
    p.set_defaults(fn=cmd_counterexample)

    p = sub.add_parser("render", help="render CSV output as SVG")
    p.add_argument("csv", nargs="+")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(fn=cmd_render)
    return ap


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
