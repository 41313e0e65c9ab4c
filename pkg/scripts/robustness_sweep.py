#!/usr/bin/env python3
"""Desk-scale robustness experiment: adapted step sizes vs a fixed-step grid.

Sweeps the initial step size over five decades for the Hessian-free
(AdamW, Adam) and (Lion, Lion) combinations on the stationary noisy
quadratic, writes one record file per run plus the fixed-step baseline grid,
and prints a summary table. Render the outputs with the plots package:

    stepadapt-plots render out/robustness/*.csv --metric alpha --out alpha_overlay
"""

import argparse
import json
from pathlib import Path

import numpy as np

from stepadapt import BaseConfig, BlockPartition, EngineConfig, MetaConfig, StepSizeMap, StreamConfig
from stepadapt.baselines import fixed_step_run
from stepadapt.engine import run
from stepadapt.records import write_records

ALPHA0_GRID = [1e-6, 1e-5, 1e-4, 1e-3, 1e-2]
FIXED_GRID = [1e-5, 1e-4, 1e-3, 1e-2, 1e-1]

COMBOS = {
    "adamw_adam": (BaseConfig(kind="adamw", kappa=0.0), MetaConfig(kind="adam", eta=1e-3)),
    "lion_lion": (BaseConfig(kind="lion", rho=0.99, c=0.9, kappa=0.0),
                  MetaConfig(kind="lion", eta=1e-3, rho_bar=0.99, c_bar=0.9)),
}


def tail_mean(recs, k=1000):
    return float(np.mean([r.loss for r in recs[-k:]]))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/robustness")
    ap.add_argument("--steps", type=int, default=16000)
    ap.add_argument("--dimension", type=int, default=50)
    ap.add_argument("--seed", type=int, default=101)
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sc = StreamConfig(kind="noisy_quadratic", dimension=args.dimension, noise=0.1, seed=args.seed)
    summary = {}

    for name, (base, meta) in COMBOS.items():
        best_fixed = None
        for a in FIXED_GRID:
            recs = fixed_step_run(base, a, sc, args.steps)
            write_records(out / f"fixed_{name.split('_')[0]}_alpha_{a:g}.csv", recs)
            tm = tail_mean(recs)
            best_fixed = tm if best_fixed is None else min(best_fixed, tm)
        cfg = EngineConfig(variant="hessian_free", gamma=1.0, base=base, meta=meta,
                           map=StepSizeMap(kind="exponential",
                                           partition=BlockPartition.scalar(args.dimension)))
        for a0 in ALPHA0_GRID:
            recs = run(cfg, sc, args.steps, alpha0=a0)
            write_records(out / f"meta_{name}_alpha0_{a0:g}.csv", recs)
            summary[f"{name}/alpha0={a0:g}"] = {
                "tail_mean": tail_mean(recs),
                "vs_best_fixed": tail_mean(recs) / best_fixed,
                "alpha_final": recs[-1].alpha_mean,
            }
        summary[f"{name}/best_fixed"] = {"tail_mean": best_fixed}

    print(json.dumps(summary, indent=2))
    (out / "summary.json").write_text(json.dumps(summary, indent=2))


if __name__ == "__main__":
    main()
