"""Command-line entry: run / sweep / verify / compare.

Exit codes: 0 success, 1 verification or comparison failure, 2 config error,
3 numeric divergence.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import dump_config, load_config
from .errors import ConfigError, DimensionError
from .harness import STATUS_DIVERGED, execute, run_sweep
from .records import read_records

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_DIVERGED = 3


def _add_common(p):
    p.add_argument("--config", required=True, help="experiment config (JSON)")
    p.add_argument("--out", default=None, help="output path (file for run, directory for sweep)")
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.add_argument("--steps", type=int, default=None, help="override config steps")


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    out = args.out or cfg.out or "run.csv"
    summary = execute(cfg, out, seed=args.seed, steps=args.steps)
    print(json.dumps(summary, indent=2))
    return EXIT_DIVERGED if summary["status"] == STATUS_DIVERGED else EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    out_dir = args.out or cfg.out or "sweep_out"
    from dataclasses import replace
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.steps is not None:
        cfg = replace(cfg, steps=args.steps)
    summaries = run_sweep(cfg, out_dir)
    print(json.dumps(summaries, indent=2))
    bad = [s for s in summaries if s["status"] == STATUS_DIVERGED]
    return EXIT_DIVERGED if bad else EXIT_OK


def cmd_verify(args) -> int:
    from .verify import run_verification_suite
    results = run_verification_suite(quick=not args.full)
    ok = True
    for name, passed, detail in results:
        print(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
        ok &= passed
    return EXIT_OK if ok else EXIT_FAIL


def cmd_compare(args) -> int:
    rec_a, abort_a = read_records(args.file_a)
    rec_b, abort_b = read_records(args.file_b)
    n = min(len(rec_a), len(rec_b))
    if len(rec_a) != len(rec_b):
        print(f"row counts differ: {len(rec_a)} vs {len(rec_b)} (comparing first {n})")
    if n and rec_a[0].block_count != rec_b[0].block_count:
        raise DimensionError("record files have different block counts")
    worst = {"loss": 0.0, "alpha": 0.0, "beta": 0.0, "z_norm": 0.0}
    first_divergence = None
    for i in range(n):
        a, b = rec_a[i], rec_b[i]
        devs = {
            "loss": abs(a.loss - b.loss),
            "alpha": float(np.abs(a.alpha_blocks - b.alpha_blocks).max()),
            "beta": float(np.abs(a.beta_blocks - b.beta_blocks).max()),
            "z_norm": abs(a.z_norm - b.z_norm),
        }
        if first_divergence is None and any(v > 0 for v in devs.values()):
            first_divergence = a.step
        for k, v in devs.items():
            worst[k] = max(worst[k], v)
    report = {"rows_compared": n, "first_divergence_step": first_divergence,
              "max_deviation": worst, "abort_a": abort_a, "abort_b": abort_b}
    print(json.dumps(report, indent=2))
    tol = args.tol
    return EXIT_OK if tol is None or max(worst.values()) <= tol else EXIT_FAIL


def cmd_show_config(args) -> int:
    print(dump_config(load_config(args.config)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stepadapt",
                                description="online step-size adaptation harness")
    sub = p.add_subparsers(dest="command", required=True)

    pr = sub.add_parser("run", help="execute one experiment")
    _add_common(pr)
    pr.set_defaults(fn=cmd_run)

    ps = sub.add_parser("sweep", help="execute the config's sweep grids")
    _add_common(ps)
    ps.set_defaults(fn=cmd_sweep)

    pv = sub.add_parser("verify", help="run the oracle / equivalence suites")
    pv.add_argument("--full", action="store_true", help="longer horizons")
    pv.set_defaults(fn=cmd_verify)

    pc = sub.add_parser("compare", help="deviation report between two record files")
    pc.add_argument("file_a")
    pc.add_argument("file_b")
    pc.add_argument("--tol", type=float, default=None,
                    help="fail (exit 1) if any deviation exceeds this")
    pc.set_defaults(fn=cmd_compare)

    pd = sub.add_parser("show-config", help="validate and echo the canonical config")
    pd.add_argument("--config", required=True)
    pd.set_defaults(fn=cmd_show_config)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, DimensionError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
