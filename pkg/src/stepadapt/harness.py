"""Experiment execution: single runs, sweeps, summaries.

Sweeps expand the cross product of the configured value grids, derive one
seed per run, and are embarrassingly parallel; the STEPADAPT_WORKERS
environment variable selects the process count (absent = serial).
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace as dc_replace
from pathlib import Path

import numpy as np

from . import baselines, engine
from .config import (FIXED_STEP, HYPERGRADIENT, IDBD, BaselineSpec, ExperimentConfig)
from .errors import ConfigError, RunAborted
from .records import RecordWriter, RunRecord
from .tasks import make_stream

WORKERS_ENV = "STEPADAPT_WORKERS"

STATUS_OK = "success"
STATUS_DIVERGED = "numeric_divergence"

RECENT_WINDOW = 1000


def _summary(records, status: str, abort_step=None) -> dict:
    tail = [r.loss for r in records[-RECENT_WINDOW:]]
    return {
        "status": status,
        "steps_completed": len(records),
        "abort_step": abort_step,
        "final_loss": records[-1].loss if records else None,
        "recent_loss_mean": float(np.mean(tail)) if tail else None,
        "alpha_min": min((r.alpha_min for r in records), default=None),
        "alpha_max": max((r.alpha_max for r in records), default=None),
        "mean_step_micros": float(np.mean([r.step_micros for r in records])) if records else None,
    }


def _run_baseline(spec: BaselineSpec, cfg: ExperimentConfig, stream, writer):
    if spec.kind == FIXED_STEP:
        return baselines.fixed_step_run(spec.base, spec.alpha, stream, cfg.steps, writer=writer)
    # idbd / hypergradient runners share the record schema through the writer
    if spec.kind == IDBD:
        runner = baselines.IdbdRunner(stream, beta0=float(np.log(cfg.alpha0)), eta=spec.eta)
    elif spec.kind == HYPERGRADIENT:
        runner = baselines.HypergradientRunner(stream, beta0=cfg.alpha0, eta=spec.eta, base=spec.base)
    else:
        raise ConfigError(f"unknown baseline kind {spec.kind!r}")
    records = []
    for t in range(cfg.steps):
        t0 = time.perf_counter()
        oracle = stream.next_loss(t)
        loss = oracle.value(runner.w)
        runner.advance()
        micros = (time.perf_counter() - t0) * 1e6
        beta = np.atleast_1d(np.asarray(runner.beta, dtype=np.float64))
        if spec.kind == IDBD:
            alpha = np.exp(beta)
        else:
            alpha = beta.copy()  # additive map
        rec = RunRecord(step=t, loss=loss, alpha_mean=float(alpha.mean()),
                        alpha_min=float(alpha.min()), alpha_max=float(alpha.max()),
                        alpha_blocks=alpha, beta_blocks=beta.copy(), z_norm=0.0,
                        switch=1 if stream.is_switch(t) else 0, step_micros=micros)
        records.append(rec)
        if writer is not None:
            writer.write(rec)
    return records


def execute(cfg: ExperimentConfig, out_path, *, seed=None, steps=None) -> dict:
    """Run one experiment, writing records incrementally to out_path."""
    if seed is not None:
        cfg = dc_replace(cfg, seed=int(seed))
    if steps is not None:
        cfg = dc_replace(cfg, steps=int(steps))
    stream = make_stream(cfg.stream, seed=cfg.seed)

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)

    if cfg.engine is not None:
        ecfg = cfg.engine.build(stream.dim)
        m = ecfg.map.beta_dim
    elif cfg.baseline is not None and cfg.baseline.kind == IDBD:
        m = stream.dim
    else:
        m = 1

    status, abort_step = STATUS_OK, None
    with RecordWriter(out_path, m) as writer:
        try:
            if cfg.engine is not None:
                records = engine.run(ecfg, stream, cfg.steps, alpha0=cfg.alpha0, writer=writer)
            else:
                records = _run_baseline(cfg.baseline, cfg, stream, writer)
        except RunAborted as e:
            records = e.records
            abort_step = e.step
            status = STATUS_DIVERGED
            writer.write_abort(e.step)

    summary = _summary(records, status, abort_step)
    summary["record_file"] = str(out_path)
    return summary


def _fmt_value(v: float) -> str:
    return f"{v:g}".replace("-", "m").replace("+", "")


def expand_sweep(cfg: ExperimentConfig) -> list[tuple[str, ExperimentConfig, int]]:
    """Cross product of the sweep grids; per-run derived seeds."""
    if not cfg.sweep:
        raise ConfigError("config has no sweep section")
    axes = []
    for key in ("alpha0", "eta", "gamma"):
        if key in cfg.sweep:
            axes.append([(key, v) for v in cfg.sweep[key]])
    combos = [[]]
    for axis in axes:
        combos = [c + [kv] for c in combos for kv in axis]
    out = []
    for idx, combo in enumerate(combos):
        sub = dc_replace(cfg, sweep={})
        parts = []
        for key, value in combo:
            parts.append(f"{key}_{_fmt_value(value)}")
            if key == "alpha0":
                if sub.baseline is not None and sub.baseline.kind == FIXED_STEP:
                    sub = dc_replace(sub, baseline=dc_replace(sub.baseline, alpha=value))
                else:
                    sub = dc_replace(sub, alpha0=value)
            elif key == "eta":
                if sub.engine is None:
                    sub = dc_replace(sub, baseline=dc_replace(sub.baseline, eta=value))
                else:
                    sub = dc_replace(sub, engine=dc_replace(sub.engine, meta=dc_replace(sub.engine.meta, eta=value)))
            elif key == "gamma":
                if sub.engine is None:
                    raise ConfigError("gamma sweep needs an engine config")
                sub = dc_replace(sub, engine=dc_replace(sub.engine, gamma=value))
        derived_seed = int(np.random.SeedSequence([cfg.seed, idx]).generate_state(1)[0])
        out.append(("_".join(parts) or f"run_{idx}", sub, derived_seed))
    return out


def _sweep_one(args):
    name, cfg, derived_seed, out_dir = args
    path = Path(out_dir) / f"{name}.csv"
    summary = execute(cfg, path, seed=derived_seed)
    summary["name"] = name
    return summary


def run_sweep(cfg: ExperimentConfig, out_dir) -> list[dict]:
    jobs = [(name, sub, seed, str(out_dir)) for name, sub, seed in expand_sweep(cfg)]
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    workers = os.environ.get(WORKERS_ENV)
    if workers and int(workers) > 1:
        with ProcessPoolExecutor(max_workers=int(workers)) as pool:
            summaries = list(pool.map(_sweep_one, jobs))
    else:
        summaries = [_sweep_one(j) for j in jobs]
    return sorted(summaries, key=lambda s: s["name"])
