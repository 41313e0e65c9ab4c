"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -s` to see the per-criterion lines
as they complete. Tolerances are fixed here, not calibrated elsewhere.
"""

import math
import statistics
import time

import numpy as np
import pytest

from stepadapt import (BaseConfig, BlockPartition, EngineConfig, EngineRunner,
                       LossOracle, MetaConfig, MetaState, StepSizeMap,
                       StreamConfig, init_base_state, init_meta_state,
                       make_stream, meta_step, run)
from stepadapt.base_opt import BASE_KINDS, base_step
from stepadapt.baselines import HypergradientRunner, IdbdRunner, fixed_step_run
from stepadapt.engine import hf_step, init_trace
from stepadapt.verify import (equivalence_run, forward_view_beta_run,
                              forward_view_oracle, grad_check)

FIXED_GRID = [1e-5, 1e-4, 1e-3, 1e-2, 1e-1]


def report(criterion, ok, detail):
    print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}")
    assert ok, f"criterion {criterion}: {detail}"


def scalar_exp_map(n):
    return StepSizeMap(kind="exponential", partition=BlockPartition.scalar(n))


def tail_mean(records, k=1000):
    return float(np.mean([r.loss for r in records[-k:]]))


def test_criterion_1_surrogate_gradient_fidelity():
    t0 = time.perf_counter()
    stream = make_stream(StreamConfig(kind="noisy_quadratic", dimension=3, noise=0.0, seed=11))
    cfg = EngineConfig(variant="exact_full_g", gamma=0.9, base=BaseConfig(kind="sgd"),
                       meta=MetaConfig(kind="sgd", eta=1e-4), map=scalar_exp_map(3))
    worst = 0.0
    for tau in (5, 12, 20):
        z_hat = forward_view_oracle(cfg, stream, tau, 1e-5, alpha0=0.05)
        r = EngineRunner(cfg, stream, alpha0=0.05)
        for _ in range(tau):
            r.advance()
        z_eng = float(r.trace.X @ stream.next_loss(tau).grad(r.w))
        worst = max(worst, abs(z_eng - z_hat[0]) / abs(z_hat[0]))
    elapsed = time.perf_counter() - t0
    report(1, worst < 1e-4 and elapsed < 5.0,
           f"exact vs forward-view oracle rel err {worst:.2e} (tol 1e-4), {elapsed:.2f}s (< 5s)")


def test_criterion_2_hypergradient_containment():
    sc = StreamConfig(kind="noisy_quadratic", dimension=4, noise=0.05, seed=3)
    worst = 0.0
    for variant in ("sgd_2x2", "exact_full_g"):
        cfg = EngineConfig(variant=variant, gamma=0.0, base=BaseConfig(kind="sgd"),
                           meta=MetaConfig(kind="sgd", eta=1e-4),
                           map=StepSizeMap(kind="identity", partition=BlockPartition.scalar(4)))
        A = EngineRunner(cfg, make_stream(sc), beta0=0.05)
        B = HypergradientRunner(make_stream(sc), beta0=0.05, eta=1e-4)
        dev, _ = equivalence_run(A, B, 200)
        worst = max(worst, dev)
    report(2, worst <= 1e-12,
           f"gamma=0 engines vs hypergradient, max coordinate dev {worst:.2e} (tol 1e-12)")


def test_criterion_3_idbd_containment():
    sc = StreamConfig(kind="idbd_features", dimension=4, noise=0.1, seed=5)
    cfg = EngineConfig(variant="l_approx", gamma=1.0, base=BaseConfig(kind="sgd"),
                       meta=MetaConfig(kind="sgd", eta=0.02),
                       map=StepSizeMap(kind="exponential", partition=BlockPartition.weightwise(4)),
                       update_order="beta_then_w", diag_hessian=True, rectifier=True)
    A = EngineRunner(cfg, make_stream(sc), alpha0=0.05)
    B = IdbdRunner(make_stream(sc), beta0=math.log(0.05), eta=0.02)
    dev, _ = equivalence_run(A, B, 500)
    report(3, dev <= 1e-9,
           f"weightwise l_approx vs per-weight adapter over 500 steps, max dev {dev:.2e} (tol 1e-9)")


class _FixedRunner:
    """Plain base-optimizer loop used as the freeze reference."""

    def __init__(self, base, alpha, stream):
        self.base = base
        self.alpha = alpha
        self.stream = stream
        self.state = init_base_state(stream.initial_weights())
        self.t = 0

    @property
    def w(self):
        return self.state.w

    def advance(self):
        g = self.stream.next_loss(self.t).grad(self.state.w)
        self.state, _ = base_step(self.base, self.state, g, self.alpha)
        self.t += 1


def test_criterion_4_freeze_equivalence():
    steps = 1000
    alpha0 = 1e-2
    alpha = float(np.exp(np.log(alpha0)))
    sc = StreamConfig(kind="noisy_quadratic", dimension=4, noise=0.2, seed=13)
    worst = 0.0
    cases = []
    for kind in BASE_KINDS:  # all five under the hessian-free wrapper
        cases.append(EngineConfig(
            variant="hessian_free", gamma=1.0, base=BaseConfig(kind=kind, kappa=0.05),
            meta=MetaConfig(kind="adam", eta=0.0), map=scalar_exp_map(4)))
    for variant in ("exact_full_g", "sgd_2x2", "l_approx"):
        cases.append(EngineConfig(
            variant=variant, gamma=0.9, base=BaseConfig(kind="sgd"),
            meta=MetaConfig(kind="sgd", eta=0.0), map=scalar_exp_map(4)))
    for cfg in cases:
        A = EngineRunner(cfg, make_stream(sc), alpha0=alpha0)
        B = _FixedRunner(cfg.base, alpha, make_stream(sc))
        for _ in range(steps):
            A.advance()
            B.advance()
            dev = float(np.abs(A.w - B.w).max())
            worst = max(worst, dev)
            if dev != 0.0:
                break
    report(4, worst == 0.0,
           f"eta=0 freeze across variants x all five base kinds over {steps} steps, "
           f"max |w| deviation {worst:.1e} (must be exactly 0)")


def test_criterion_5_backward_forward_limit_trend():
    T = 50
    stream = make_stream(StreamConfig(kind="noisy_quadratic", dimension=3, noise=0.0, seed=21))
    gaps = []
    for eta in (1e-2, 1e-3, 1e-4):
        cfg = EngineConfig(variant="exact_full_g", gamma=0.9, base=BaseConfig(kind="sgd"),
                           meta=MetaConfig(kind="sgd", eta=eta), map=scalar_exp_map(3))
        r = EngineRunner(cfg, stream, alpha0=0.05)
        for _ in range(T):
            r.advance()
        b_fwd = forward_view_beta_run(cfg, stream, T, 1e-6, alpha0=0.05)
        gaps.append(abs(float(r.beta[0]) - b_fwd) / eta)
    report(5, gaps[0] > gaps[1] > gaps[2],
           "normalized backward-forward gap decreases with eta: "
           + " > ".join(f"{g:.3e}" for g in gaps))


def test_criterion_6_robustness_sweep():
    t0 = time.perf_counter()
    streams = {
        "quadratic": (StreamConfig(kind="noisy_quadratic", dimension=50, noise=0.1, seed=101), 15000),
        "mlp": (StreamConfig(kind="mlp_classification", dimension=4, noise=1.2, seed=202,
                             hidden=6, classes=2, batch_size=8), 13000),
    }
    combos = {
        "adamw/adam": (BaseConfig(kind="adamw", kappa=0.0), MetaConfig(kind="adam", eta=1e-3)),
        "lion/lion": (BaseConfig(kind="lion", rho=0.99, c=0.9, kappa=0.0),
                      MetaConfig(kind="lion", eta=1e-3, rho_bar=0.99, c_bar=0.9)),
    }
    alpha0_grid = [1e-6, 1e-5, 1e-4, 1e-3, 1e-2]
    worst = 0.0
    failures = []
    for sname, (sc, steps) in streams.items():
        n = make_stream(sc).dim
        for cname, (base, meta) in combos.items():
            best_fixed = min(tail_mean(fixed_step_run(base, a, sc, steps)) for a in FIXED_GRID)
            cfg = EngineConfig(variant="hessian_free", gamma=1.0, base=base, meta=meta,
                               map=scalar_exp_map(n))
            for a0 in alpha0_grid:
                ratio = tail_mean(run(cfg, sc, steps, alpha0=a0)) / best_fixed
                worst = max(worst, ratio)
                if ratio > 1.2:
                    failures.append(f"{sname}/{cname}/alpha0={a0:g}: {ratio:.3f}")
    elapsed = time.perf_counter() - t0
    report(6, not failures and elapsed < 120.0,
           f"final-1000 mean loss within 1.2x best fixed baseline for all 20 runs "
           f"(worst ratio {worst:.3f}), {elapsed:.1f}s (< 120s)"
           + (f"; failures: {failures}" if failures else ""))


def test_criterion_7_nonstationary_surge():
    period = 2500
    sc = StreamConfig(kind="drifting_quadratic", dimension=20, noise=0.05,
                      switch_period=period, seed=303)
    steps = period * 11
    cfg = EngineConfig(variant="hessian_free", gamma=0.999,
                       base=BaseConfig(kind="adamw", kappa=0.0),
                       meta=MetaConfig(kind="adam", eta=1e-3), map=scalar_exp_map(20))
    recs = run(cfg, sc, steps, alpha0=1e-3)
    alpha = np.array([r.alpha_mean for r in recs])
    switch_steps = [t for t in range(1, steps) if recs[t].switch]
    wins = sum(alpha[s:s + 100].mean() > alpha[s - 100:s].mean() for s in switch_steps)
    report(7, len(switch_steps) == 10 and wins >= 8,
           f"mean step size rose in the 100 steps after {wins}/10 switches (need >= 8)")


def _overhead_median_ratio(n, oracle, base, cfg, alpha):
    rng = np.random.default_rng(1)
    bs_h = init_base_state(rng.normal(size=n))
    ms = init_meta_state(np.array([math.log(alpha)]))
    tr = init_trace(cfg, n)
    bs_b = init_base_state(rng.normal(size=n))
    for _ in range(10):  # warmup
        bs_h, ms, tr, _ = hf_step(cfg, bs_h, ms, tr, oracle)
        g = oracle.grad(bs_b.w)
        bs_b, _ = base_step(base, bs_b, g, alpha)
    ratios = []
    for _ in range(20):  # 20 x 50 steps per side, interleaved against machine noise
        t0 = time.perf_counter()
        for _ in range(50):
            bs_h, ms, tr, _ = hf_step(cfg, bs_h, ms, tr, oracle)
        t1 = time.perf_counter()
        for _ in range(50):
            loss = oracle.value(bs_b.w)
            g = oracle.grad(bs_b.w)
            bs_b, _ = base_step(base, bs_b, g, alpha)
        t2 = time.perf_counter()
        ratios.append((t1 - t0) / (t2 - t1))
    return statistics.median(ratios)


def test_criterion_8_hessian_free_overhead():
    import gc

    n = 100_000
    rng = np.random.default_rng(0)
    adiag = 0.5 + rng.random(n)
    c = rng.normal(size=n)
    oracle = LossOracle(value=lambda w: float(0.5 * np.sum(adiag * (w - c) ** 2)),
                        grad=lambda w: adiag * (w - c))
    base = BaseConfig(kind="adamw", kappa=0.1)
    cfg = EngineConfig(variant="hessian_free", gamma=1.0, base=base,
                       meta=MetaConfig(kind="adam", eta=0.0),  # identical trajectories both sides
                       map=scalar_exp_map(n))
    # shared-machine contention can poison a whole attempt; take the best of
    # three medians (a slow implementation cannot dip below its true floor)
    best = math.inf
    for attempt in range(3):
        gc.collect()
        best = min(best, _overhead_median_ratio(n, oracle, base, cfg, 1e-3))
        if best <= 1.5:
            break
    report(8, best <= 1.5,
           f"hessian-free step vs bare base step at n=1e5, amortized over 1000 steps per "
           f"side per attempt: best median ratio {best:.3f} (tol 1.5)")


def test_criterion_9_numeric_hygiene():
    quad = make_stream(StreamConfig(kind="noisy_quadratic", dimension=6, noise=0.2, seed=7))
    err_q = grad_check(quad.next_loss(0), quad.initial_weights(), 1e-5)
    mlp = make_stream(StreamConfig(kind="mlp_classification", dimension=4, noise=0.5,
                                   seed=7, batch_size=4))
    err_m = grad_check(mlp.next_loss(0), mlp.initial_weights(), 1e-5)

    cfg = MetaConfig(kind="adam", eta=1e-3)
    rng = np.random.default_rng(11)
    zs = rng.normal(size=(300, 2))
    a = init_meta_state(np.array([-4.0, -4.0]))
    b = init_meta_state(np.array([-4.0, -4.0]))
    for z in zs:
        a = meta_step(cfg, a, z)
        b = meta_step(cfg, b, 1e3 * z)
    scale_dev = float(np.abs(a.beta - b.beta).max())
    ok = err_q < 1e-8 and err_m < 1e-4 and scale_dev < 1e-6
    report(9, ok,
           f"grad check quadratic {err_q:.1e} (<1e-8), mlp {err_m:.1e} (<1e-4), "
           f"adam-meta scale invariance under 1e3 z-scaling {scale_dev:.1e} (<1e-6)")
