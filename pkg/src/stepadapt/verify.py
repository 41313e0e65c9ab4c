"""Independent oracles: finite-difference derivatives and trajectory equivalence.

The forward-view oracle measures, by central differences with common random
numbers, the discounted total derivative the trace recursions are supposed to
track: perturb the beta consumed by step t, replay the full coupled dynamics
(base, meta and trace updates all react) to step tau, and accumulate

    (1-gamma) * sum_t gamma^(tau-t-1) * (w_tau(+eps) - w_tau(-eps)) / (2 eps),

then contract with grad f_tau. Streams regenerate losses from (seed, t), so a
replay sees bit-identical randomness — without that the oracle is
meaningless. Cost is O(tau * m) full replays; keep tau <= 50 and n <= 10.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .blocks import derive_rng
from .engine import EngineConfig, EngineRunner
from .errors import CapabilityError, ConfigError, DimensionError
from .stepsize import EXPONENTIAL
from .tasks import LossOracle, StreamConfig, make_stream


def _replay_sequence(cfg: EngineConfig, stream, tau: int, *, alpha0=None, beta0=None, w0=None):
    """Nominal run with a state snapshot before every step t <= tau."""
    runner = EngineRunner(cfg, stream, alpha0=alpha0, beta0=beta0, w0=w0)
    snaps = []
    for _ in range(tau):
        snaps.append(runner.snapshot())
        runner.advance()
    return runner, snaps


def forward_view_h(cfg: EngineConfig, stream, tau: int, eps: float, *,
                   alpha0=None, beta0=None, w0=None) -> tuple[np.ndarray, np.ndarray]:
    """Finite-difference estimate of the (n, m) discounted trace at step tau.

    Returns (H_hat, grad_tau). Summation order is fixed (t, then block) so the
    accumulation is reproducible.
    """
    if tau < 1:
        raise ConfigError("tau must be >= 1")
    if not 1e-8 <= eps <= 1e-2:
        raise ConfigError("eps must lie in [1e-8, 1e-2]")
    if isinstance(stream, StreamConfig):
        stream = make_stream(stream)
    if not hasattr(stream, "next_loss"):
        raise CapabilityError("stream does not support replay by seed")
    gamma = cfg.gamma
    m = cfg.map.beta_dim
    norm = (1.0 - gamma) if gamma < 1.0 else 1.0

    nominal, snaps = _replay_sequence(cfg, stream, tau, alpha0=alpha0, beta0=beta0, w0=w0)
    grad_tau = stream.next_loss(tau).grad(nominal.w)

    H_hat = np.zeros((stream.dim, m))
    probe = EngineRunner(cfg, stream, alpha0=alpha0, beta0=beta0, w0=w0)
    for t in range(tau):
        weight = norm * gamma ** (tau - t - 1)
        if weight == 0.0:
            continue
        for j in range(m):
            finals = []
            for sign in (+1.0, -1.0):
                probe.restore(snaps[t])
                beta = probe.meta_state.beta.copy()
                beta[j] += sign * eps
                probe.meta_state = replace(probe.meta_state, beta=beta)
                for _ in range(t, tau):
                    probe.advance()
                finals.append(probe.w.copy())
            H_hat[:, j] += weight * (finals[0] - finals[1]) / (2.0 * eps)
    return H_hat, grad_tau


def forward_view_oracle(cfg: EngineConfig, stream, tau: int, eps: float, *,
                        alpha0=None, beta0=None, w0=None) -> np.ndarray:
    """Surrogate meta-gradient estimate at step tau: H_hat^T grad f_tau."""
    H_hat, grad_tau = forward_view_h(cfg, stream, tau, eps,
                                     alpha0=alpha0, beta0=beta0, w0=w0)
    return H_hat.T @ grad_tau


def grad_check(oracle: LossOracle, w, eps: float, *, probes: int = 32, seed: int = 0) -> float:
    """Max relative error of oracle.grad against central differences of value.

    All coordinates when n <= 200, otherwise `probes` random coordinates.
    """
    if not 1e-8 <= eps <= 1e-3:
        raise ConfigError("eps must lie in [1e-8, 1e-3]")
    w = np.asarray(w, dtype=np.float64)
    g = oracle.grad(w)
    n = w.size
    coords = range(n) if n <= 200 else derive_rng(seed, 99).choice(n, size=probes, replace=False)
    worst = 0.0
    for i in coords:
        e = np.zeros(n)
        e[i] = eps
        fd = (oracle.value(w + e) - oracle.value(w - e)) / (2.0 * eps)
        denom = max(abs(g[i]), abs(fd), 1.0)
        worst = max(worst, abs(fd - g[i]) / denom)
    return worst


def equivalence_run(A, B, steps: int) -> tuple[float, int | None]:
    """Max coordinatewise |A - B| over the w and beta trajectories.

    A and B must consume the identical stream and seed; both expose
    .advance(), .w and .beta. Returns (max deviation, first step with any
    nonzero deviation or None).
    """
    max_dev = 0.0
    first = None
    for t in range(steps):
        A.advance()
        B.advance()
        wa, wb = np.asarray(A.w), np.asarray(B.w)
        ba, bb = np.atleast_1d(A.beta), np.atleast_1d(B.beta)
        if wa.shape != wb.shape:
            raise DimensionError("weight trajectories have different shapes")
        if ba.shape != bb.shape:
            # scalar-vs-weightwise beta: compare via broadcast when one side is scalar
            if ba.size == 1:
                ba = np.broadcast_to(ba, bb.shape)
            elif bb.size == 1:
                bb = np.broadcast_to(bb, ba.shape)
            else:
                raise DimensionError("beta trajectories have different shapes")
        dev = max(float(np.abs(wa - wb).max()), float(np.abs(ba - bb).max()))
        if dev > 0.0 and first is None:
            first = t
        max_dev = max(max_dev, dev)
    return max_dev, first


def forward_view_beta_run(cfg: EngineConfig, stream, steps: int, eps: float, *,
                          alpha0=None, beta0=None, w0=None) -> float:
    """Final beta of the non-causal forward-view update on a finite horizon.

    At each step t the beta update consumes the discounted sum over future
    losses tau > t of d f_tau / d beta_t, measured by central differences with
    the future betas frozen at the perturbed value (the small-eta limit of the
    persistent-beta channel). Scalar beta, SGD base / SGD meta.
    """
    if isinstance(stream, StreamConfig):
        stream = make_stream(stream)
    if cfg.map.beta_dim != 1:
        raise ConfigError("forward-view run is defined for scalar beta")
    gamma, eta = cfg.gamma, cfg.meta.eta
    norm = (1.0 - gamma) if gamma < 1.0 else 1.0
    w = stream.initial_weights() if w0 is None else np.asarray(w0, dtype=np.float64)
    if beta0 is None:
        beta0 = np.log(alpha0) if cfg.map.kind == EXPONENTIAL else alpha0
    beta = float(np.asarray(beta0).ravel()[0])

    def alpha_of(b: float) -> float:
        return float(np.exp(b)) if cfg.map.kind == EXPONENTIAL else float(b)

    def future_losses(w_t, b: float, t: int):
        # frozen-beta replay of the base dynamics from step t; the horizon
        # ends at the last loss the backward run sees (f_{steps-1})
        losses = []
        wv = w_t.copy()
        a = alpha_of(b)
        for s in range(t, steps - 1):
            o = stream.next_loss(s)
            wv = wv - a * o.grad(wv)
            losses.append(stream.next_loss(s + 1).value(wv))
        return np.asarray(losses)  # losses[k] = f_{t+1+k}(w_{t+1+k})

    for t in range(steps):
        plus = future_losses(w, beta + eps, t)
        minus = future_losses(w, beta - eps, t)
        k = np.arange(plus.size)
        ghat = norm * float(np.sum(gamma ** k * (plus - minus))) / (2.0 * eps)
        oracle = stream.next_loss(t)
        w = w - alpha_of(beta) * oracle.grad(w)
        beta = beta - eta * ghat
    return beta


def run_verification_suite(quick: bool = True) -> list[tuple[str, bool, str]]:
    """Oracle and equivalence checks for the `verify` CLI subcommand."""
    from . import baselines
    from .base_opt import BaseConfig
    from .engine import EXACT_FULL_G, L_APPROX, SGD_2X2, BETA_THEN_W, EngineRunner
    from .meta_opt import MetaConfig
    from .blocks import BlockPartition
    from .stepsize import IDENTITY, StepSizeMap
    from .tasks import MLP_CLASSIFICATION, NOISY_QUADRATIC, IDBD_FEATURES

    results = []

    def record(name, ok, detail):
        results.append((name, bool(ok), detail))

    # exact engine vs the finite-difference oracle
    tau = 12 if quick else 20
    stream = make_stream(StreamConfig(kind=NOISY_QUADRATIC, dimension=3, noise=0.0, seed=11))
    cfg = EngineConfig(variant=EXACT_FULL_G, gamma=0.9, base=BaseConfig(kind="sgd"),
                       meta=MetaConfig(kind="sgd", eta=1e-4),
                       map=StepSizeMap(kind="exponential", partition=BlockPartition.scalar(3)))
    z_hat = forward_view_oracle(cfg, stream, tau, 1e-5, alpha0=0.05)
    runner = EngineRunner(cfg, stream, alpha0=0.05)
    for _ in range(tau):
        runner.advance()
    z_eng = np.array([runner.trace.X @ stream.next_loss(tau).grad(runner.w)])
    rel = float(np.max(np.abs(z_eng - z_hat) / np.maximum(np.abs(z_hat), 1e-300)))
    record("exact surrogate vs forward-view oracle", rel < 1e-4, f"rel={rel:.3g}")

    # gamma = 0 + identity map reduces to additive hypergradient descent
    steps = 100 if quick else 200
    sc = StreamConfig(kind=NOISY_QUADRATIC, dimension=4, noise=0.05, seed=3)
    ecfg = EngineConfig(variant=SGD_2X2, gamma=0.0, base=BaseConfig(kind="sgd"),
                        meta=MetaConfig(kind="sgd", eta=1e-4),
                        map=StepSizeMap(kind=IDENTITY, partition=BlockPartition.scalar(4)))
    A = EngineRunner(ecfg, make_stream(sc), beta0=0.05)
    B = baselines.HypergradientRunner(make_stream(sc), beta0=0.05, eta=1e-4)
    dev, _ = equivalence_run(A, B, steps)
    record("sgd_2x2(gamma=0) vs hypergradient", dev <= 1e-12, f"max dev={dev:.3g}")

    # weightwise L-approximation reduces to the classic per-weight adapter
    steps = 200 if quick else 500
    sc = StreamConfig(kind=IDBD_FEATURES, dimension=4, noise=0.1, seed=5)
    lcfg = EngineConfig(variant=L_APPROX, gamma=1.0, base=BaseConfig(kind="sgd"),
                        meta=MetaConfig(kind="sgd", eta=0.02),
                        map=StepSizeMap(kind="exponential", partition=BlockPartition.weightwise(4)),
                        update_order=BETA_THEN_W, diag_hessian=True, rectifier=True)
    A = EngineRunner(lcfg, make_stream(sc), alpha0=0.05)
    B = baselines.IdbdRunner(make_stream(sc), beta0=float(np.log(0.05)), eta=0.02)
    dev, _ = equivalence_run(A, B, steps)
    record("weightwise l_approx vs per-weight adapter", dev <= 1e-9, f"max dev={dev:.3g}")

    # gradient hygiene
    q = make_stream(StreamConfig(kind=NOISY_QUADRATIC, dimension=6, noise=0.2, seed=7))
    err = grad_check(q.next_loss(0), q.initial_weights(), 1e-5)
    record("gradient check (quadratic)", err < 1e-8, f"max rel err={err:.3g}")
    mlp = make_stream(StreamConfig(kind=MLP_CLASSIFICATION, dimension=4, noise=0.5,
                                   seed=7, batch_size=4))
    err = grad_check(mlp.next_loss(0), mlp.initial_weights(), 1e-5)
    record("gradient check (mlp)", err < 1e-4, f"max rel err={err:.3g}")
    return results
