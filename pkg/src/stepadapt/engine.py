"""Trace recursions binding the base and meta updates.

Four variants:

* ``exact_full_g`` — the full 3x3 block-matrix recursion over (Y, X, Q),
  instantiated for scalar beta with SGD base / SGD meta on quadratic losses
  (constant Hessian makes the third-order block exactly zero).
* ``sgd_2x2`` — drops the Q row/column; H and Y recursions driven by
  Hessian-vector products.
* ``l_approx`` — additionally pins Y to the identity; with weightwise beta a
  diagonal-Hessian option (plus optional rectifier) reproduces the classic
  per-weight step-size adapters exactly.
* ``hessian_free`` — zeroes every Hessian term; a single n-vector trace
  h' = gamma*(1-kappa*alpha)*h + delta_w and block-grouped z, a few vector
  operations on top of the bare base update.

Everything steps with time-t values: weights first, then beta, with the
pre-update trace feeding the surrogate gradient. The beta_then_w order exists
only to bit-match the published per-weight adapters and is accepted for
sgd_2x2 / l_approx only.

Trace seeding for the exact variant: the discounted-derivative definitions
start all traces at zero (empty sums), and the finite-difference oracle in
`verify` measures exactly that object, so gamma < 1 defaults to Y_0 = 0. At
gamma = 1 the (1-gamma) injection vanishes and the recursion must start from
a nonzero Y_0 = 1 to be non-degenerate (the drop-the-scaling workaround);
``exact_init`` overrides the automatic choice. The 2x2 recursion keeps its
printed seed Y_0 = 1.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .base_opt import BaseConfig, BaseState, SGD, base_step, init_base_state
from .blocks import BlockPartition, block_sum
from .errors import CapabilityError, ConfigError, NumericError, RunAborted
from .meta_opt import MetaConfig, MetaState, META_SGD, init_meta_state, meta_step
from .records import RunRecord
from .stepsize import EXPONENTIAL, StepSizeMap, map_alpha_blocks, map_jacobian_blocks
from .tasks import LossOracle, StreamConfig, make_stream

EXACT_FULL_G = "exact_full_g"
SGD_2X2 = "sgd_2x2"
L_APPROX = "l_approx"
HESSIAN_FREE = "hessian_free"

VARIANTS = (EXACT_FULL_G, SGD_2X2, L_APPROX, HESSIAN_FREE)

W_THEN_BETA = "w_then_beta"
BETA_THEN_W = "beta_then_w"

# divergence guard: abort instead of silently degrading
TRACE_LIMIT = 1e12


@dataclass(frozen=True)
class EngineConfig:
    variant: str
    gamma: float
    base: BaseConfig
    meta: MetaConfig
    map: StepSizeMap
    update_order: str = W_THEN_BETA
    diag_hessian: bool = False
    rectifier: bool = False
    exact_init: str = "auto"  # auto | definition | unit

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown engine variant {self.variant!r}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError("gamma must lie in [0, 1]")
        if self.update_order not in (W_THEN_BETA, BETA_THEN_W):
            raise ConfigError(f"unknown update order {self.update_order!r}")
        if self.exact_init not in ("auto", "definition", "unit"):
            raise ConfigError(f"unknown exact_init {self.exact_init!r}")
        if self.variant in (EXACT_FULL_G, SGD_2X2, L_APPROX):
            if self.base.kind != SGD or self.meta.kind != META_SGD:
                raise ConfigError(f"{self.variant} requires SGD base and SGD meta")
            if self.base.kappa != 0.0:
                raise ConfigError(f"{self.variant} does not carry a weight-decay term")
        if self.variant == EXACT_FULL_G and self.map.beta_dim != 1:
            raise ConfigError("exact_full_g requires a scalar beta")
        if self.update_order == BETA_THEN_W and self.variant not in (SGD_2X2, L_APPROX):
            raise ConfigError("beta_then_w order applies to sgd_2x2 / l_approx only")
        if self.rectifier and not self.diag_hessian:
            raise ConfigError("the rectifier pairs with the diagonal-Hessian option")
        if self.diag_hessian and not (self.variant == L_APPROX and self.map.partition.is_identity):
            raise ConfigError("diag_hessian applies to weightwise l_approx only")


# --------------------------------------------------------------------------
# traces


@dataclass(frozen=True)
class HFTrace:
    h: np.ndarray  # (n,), h_0 = 0


@dataclass(frozen=True)
class SgdTrace:
    H: np.ndarray  # (n, m), H_0 = 0
    Y: np.ndarray  # (m, m), Y_0 = I


@dataclass(frozen=True)
class DiagTrace:
    h: np.ndarray  # (n,) weightwise diagonal trace, h_0 = 0


@dataclass(frozen=True)
class ExactTrace:
    Y: float
    X: np.ndarray  # (n,), the top rows of the stacked X block (= H)
    Q: np.ndarray  # (n,)


def init_trace(cfg: EngineConfig, n: int):
    m = cfg.map.beta_dim
    if cfg.variant == HESSIAN_FREE:
        return HFTrace(h=np.zeros(n))
    if cfg.variant == EXACT_FULL_G:
        if cfg.exact_init == "unit" or (cfg.exact_init == "auto" and cfg.gamma == 1.0):
            y0 = 1.0
        else:
            y0 = 0.0
        return ExactTrace(Y=y0, X=np.zeros(n), Q=np.zeros(n))
    if cfg.variant == L_APPROX and cfg.map.partition.is_identity:
        return DiagTrace(h=np.zeros(n))
    return SgdTrace(H=np.zeros((n, m)), Y=np.eye(m))


@dataclass(frozen=True)
class StepDiagnostics:
    loss: float
    alpha_blocks: np.ndarray  # (m,)
    z: np.ndarray             # (m,)


def _alpha_blocks(cfg: EngineConfig, beta: np.ndarray) -> np.ndarray:
    a = map_alpha_blocks(cfg.map, beta)
    if cfg.map.kind == EXPONENTIAL and not (a > 0.0).all():
        raise NumericError("exponential map produced a non-positive step size")
    return a


def _guard_trace(arr: np.ndarray, step: int):
    # max |.| without a temporary; the trace arrays reach 1e5+ entries
    if arr.size == 0:
        return
    mx = max(float(arr.max()), -float(arr.min()))
    if not np.isfinite(mx) or mx > TRACE_LIMIT:
        raise NumericError(f"trace magnitude {mx:g} signals divergence", step=step)


def _spread(sigma_g: np.ndarray, p: BlockPartition) -> np.ndarray:
    """(n, m) matrix with column j = sigma'*grad masked to block j."""
    S = np.zeros((p.dim, p.block_count))
    S[np.arange(p.dim), p.assignment] = sigma_g
    return S


# --------------------------------------------------------------------------
# variant steps: (cfg, base_state, meta_state, trace, oracle)
#             -> (base_state', meta_state', trace', StepDiagnostics)


def hf_step(cfg: EngineConfig, base_state: BaseState, meta_state: MetaState,
            trace: HFTrace, oracle: LossOracle):
    p = cfg.map.partition
    w = base_state.w
    loss = oracle.value(w)
    if not np.isfinite(loss):
        raise NumericError("non-finite loss", step=base_state.t)
    g = oracle.grad(w)

    ab = _alpha_blocks(cfg, meta_state.beta)
    alpha = float(ab[0]) if p.block_count == 1 else ab[p.assignment]

    base_new, delta_w = base_step(cfg.base, base_state, g, alpha)

    # pre-update h feeds the meta update; the h recursion is kept to a couple
    # of vector passes so the wrapper stays cheap next to the base update
    h = trace.h
    if p.block_count == 1:
        z = np.array([np.dot(h, g)])
    else:
        z = block_sum(h * g, p)
    if cfg.base.kappa != 0.0:
        h_new = (cfg.gamma * (1.0 - cfg.base.kappa * alpha)) * h
    else:
        h_new = cfg.gamma * h
    h_new += delta_w
    _guard_trace(h_new, base_state.t)

    meta_new = meta_step(cfg.meta, meta_state, z)
    return base_new, meta_new, HFTrace(h=h_new), StepDiagnostics(loss, ab, z)


def sgd2x2_step(cfg: EngineConfig, base_state: BaseState, meta_state: MetaState,
                trace: SgdTrace, oracle: LossOracle):
    if not oracle.has_hvp:
        raise CapabilityError("sgd_2x2 needs Hessian-vector products")
    p = cfg.map.partition
    w, beta = base_state.w, meta_state.beta
    gamma, eta = cfg.gamma, cfg.meta.eta
    loss = oracle.value(w)
    g = oracle.grad(w)
    H, Y = trace.H, trace.Y

    z = H.T @ g  # pre-update trace in the meta update (both orders)
    meta_new = meta_step(cfg.meta, meta_state, z)
    beta_eff = meta_new.beta if cfg.update_order == BETA_THEN_W else beta

    ab = _alpha_blocks(cfg, beta_eff)
    alpha = ab[p.assignment]
    sigma_g = map_jacobian_blocks(cfg.map, beta_eff)[p.assignment] * g

    HessH = np.column_stack([oracle.hvp(w, H[:, j]) for j in range(H.shape[1])])
    S = _spread(sigma_g, p)
    H_new = gamma * (H - alpha[:, None] * HessH) - S @ Y
    Y_new = gamma * Y + (1.0 - gamma) * np.eye(p.block_count) - gamma * eta * (H.T @ HessH)
    _guard_trace(H_new, base_state.t)

    new_w = w - alpha * g
    if not np.isfinite(new_w).all():
        raise NumericError("non-finite weights", step=base_state.t)
    base_new = replace(base_state, w=new_w, t=base_state.t + 1)
    return base_new, meta_new, SgdTrace(H=H_new, Y=Y_new), StepDiagnostics(loss, ab, z)


def l_approx_step(cfg: EngineConfig, base_state: BaseState, meta_state: MetaState,
                  trace, oracle: LossOracle):
    p = cfg.map.partition
    w, beta = base_state.w, meta_state.beta
    gamma = cfg.gamma
    loss = oracle.value(w)
    g = oracle.grad(w)

    if isinstance(trace, DiagTrace):
        # weightwise: the trace collapses to one scalar per weight
        h = trace.h
        z = h * g
        meta_new = meta_step(cfg.meta, meta_state, z)
        beta_eff = meta_new.beta if cfg.update_order == BETA_THEN_W else beta
        ab = _alpha_blocks(cfg, beta_eff)
        alpha = ab
        sigma_g = map_jacobian_blocks(cfg.map, beta_eff) * g
        if cfg.diag_hessian:
            decay = 1.0 - alpha * oracle.hessian_diag(w)
            if cfg.rectifier:
                decay = np.maximum(decay, 0.0)
            h_new = gamma * decay * h - sigma_g
        else:
            if not oracle.has_hvp:
                raise CapabilityError("l_approx needs Hessian-vector products")
            h_new = gamma * (h - alpha * oracle.hvp(w, h)) - sigma_g
        _guard_trace(h_new, base_state.t)
        new_w = w - alpha * g
        if not np.isfinite(new_w).all():
            raise NumericError("non-finite weights", step=base_state.t)
        base_new = replace(base_state, w=new_w, t=base_state.t + 1)
        return base_new, meta_new, DiagTrace(h=h_new), StepDiagnostics(loss, ab, z)

    # blockwise / scalar: the 2x2 recursion with Y pinned to the identity
    if not oracle.has_hvp:
        raise CapabilityError("l_approx needs Hessian-vector products")
    H = trace.H
    z = H.T @ g
    meta_new = meta_step(cfg.meta, meta_state, z)
    beta_eff = meta_new.beta if cfg.update_order == BETA_THEN_W else beta
    ab = _alpha_blocks(cfg, beta_eff)
    alpha = ab[p.assignment]
    sigma_g = map_jacobian_blocks(cfg.map, beta_eff)[p.assignment] * g
    HessH = np.column_stack([oracle.hvp(w, H[:, j]) for j in range(H.shape[1])])
    H_new = gamma * (H - alpha[:, None] * HessH) - _spread(sigma_g, p)
    _guard_trace(H_new, base_state.t)
    new_w = w - alpha * g
    if not np.isfinite(new_w).all():
        raise NumericError("non-finite weights", step=base_state.t)
    base_new = replace(base_state, w=new_w, t=base_state.t + 1)
    return base_new, meta_new, SgdTrace(H=H_new, Y=trace.Y), StepDiagnostics(loss, ab, z)


def exact_step(cfg: EngineConfig, base_state: BaseState, meta_state: MetaState,
               trace: ExactTrace, oracle: LossOracle):
    """Full 3x3 block recursion, scalar beta, quadratic oracle.

    G rows (evaluated at time-t values, B = gamma*Y + (1-gamma)):
      beta: [1,                      -eta X^T Hess,                 -eta g^T        ]
      w:    [-sigma' g,              I - alpha Hess,                0               ]
      h:    [-sigma'' g B
              - gamma sigma' Hess X, -sigma' B Hess (3rd order = 0), gamma(I-alpha Hess)]
    and stack' = G (gamma * stack + (1-gamma) * [1; 0; 0]).
    """
    if not oracle.has_hessian:
        raise CapabilityError("exact_full_g needs a dense (constant) Hessian")
    w, beta = base_state.w, meta_state.beta
    gamma, eta = cfg.gamma, cfg.meta.eta
    loss = oracle.value(w)
    g = oracle.grad(w)
    A = oracle.hessian(w)

    ab = _alpha_blocks(cfg, beta)
    alpha = float(ab[0])
    sig1 = float(map_jacobian_blocks(cfg.map, beta)[0])
    sig2 = alpha if cfg.map.kind == EXPONENTIAL else 0.0

    Y, X, Q = trace.Y, trace.X, trace.Q
    b = gamma * Y + (1.0 - gamma)
    AX = A @ X

    z = np.array([X @ g])
    Y_new = b - eta * gamma * float(X @ AX) - eta * gamma * float(g @ Q)
    X_new = -sig1 * g * b + gamma * (X - alpha * AX)
    dh_dbeta = -sig2 * g * b - gamma * sig1 * AX
    Q_new = dh_dbeta * b - gamma * sig1 * b * AX + gamma * gamma * (Q - alpha * (A @ Q))
    _guard_trace(X_new, base_state.t)

    new_w = w - alpha * g
    if not np.isfinite(new_w).all():
        raise NumericError("non-finite weights", step=base_state.t)
    base_new = replace(base_state, w=new_w, t=base_state.t + 1)
    meta_new = meta_step(cfg.meta, meta_state, z)
    return base_new, meta_new, ExactTrace(Y=Y_new, X=X_new, Q=Q_new), StepDiagnostics(loss, ab, z)


_STEP_FNS = {
    HESSIAN_FREE: hf_step,
    SGD_2X2: sgd2x2_step,
    L_APPROX: l_approx_step,
    EXACT_FULL_G: exact_step,
}


def engine_step(cfg: EngineConfig, base_state, meta_state, trace, oracle):
    return _STEP_FNS[cfg.variant](cfg, base_state, meta_state, trace, oracle)


# --------------------------------------------------------------------------
# running


class EngineRunner:
    """Owns one run's state; steps are sequential, runs are independent."""

    def __init__(self, cfg: EngineConfig, stream, *, alpha0: float | None = None,
                 beta0=None, w0=None):
        if isinstance(stream, StreamConfig):
            stream = make_stream(stream)
        self.cfg = cfg
        self.stream = stream
        n = stream.dim
        if cfg.map.partition.dim != n:
            raise ConfigError(f"partition is over {cfg.map.partition.dim} weights, stream has {n}")
        m = cfg.map.beta_dim
        if beta0 is None:
            if alpha0 is None:
                alpha0 = 1e-3
            if alpha0 <= 0:
                raise ConfigError("alpha0 must be > 0")
            beta0 = np.log(alpha0) if cfg.map.kind == EXPONENTIAL else alpha0
        beta0 = np.broadcast_to(np.asarray(beta0, dtype=np.float64), (m,)).copy()
        self.base_state = init_base_state(stream.initial_weights() if w0 is None else np.asarray(w0, dtype=np.float64))
        self.meta_state = init_meta_state(beta0)
        self.trace = init_trace(cfg, n)
        self.t = 0

    @property
    def w(self) -> np.ndarray:
        return self.base_state.w

    @property
    def beta(self) -> np.ndarray:
        return self.meta_state.beta

    def snapshot(self):
        return (self.base_state, self.meta_state, self.trace, self.t)

    def restore(self, snap):
        self.base_state, self.meta_state, self.trace, self.t = snap

    def advance(self) -> StepDiagnostics:
        oracle = self.stream.next_loss(self.t)
        try:
            self.base_state, self.meta_state, self.trace, diag = engine_step(
                self.cfg, self.base_state, self.meta_state, self.trace, oracle)
        except NumericError as e:
            if e.step is None:
                raise NumericError(str(e), step=self.t) from e
            raise
        self.t += 1
        return diag


def _make_record(step: int, diag: StepDiagnostics, beta: np.ndarray,
                 sizes: np.ndarray, switch: bool, micros: float) -> RunRecord:
    ab = diag.alpha_blocks
    n = int(sizes.sum())
    return RunRecord(
        step=step,
        loss=diag.loss,
        alpha_mean=float(ab @ sizes) / n,
        alpha_min=float(ab.min()),
        alpha_max=float(ab.max()),
        alpha_blocks=np.asarray(ab, dtype=np.float64).copy(),
        beta_blocks=np.asarray(beta, dtype=np.float64).copy(),
        z_norm=float(np.linalg.norm(diag.z)),
        switch=1 if switch else 0,
        step_micros=micros,
    )


def run(cfg: EngineConfig, stream, steps: int, seed: int | None = None, *,
        alpha0: float | None = None, beta0=None, w0=None, writer=None) -> list[RunRecord]:
    """Run the engine for `steps` iterations, one RunRecord per step.

    Deterministic given all inputs. The first numeric error aborts the run
    with the partial records retained on the RunAborted exception. A writer
    receives each record as it is produced (incremental emission).
    """
    if steps < 1:
        raise ConfigError("steps must be >= 1")
    if isinstance(stream, StreamConfig):
        stream = make_stream(stream, seed=seed)
    runner = EngineRunner(cfg, stream, alpha0=alpha0, beta0=beta0, w0=w0)
    sizes = cfg.map.partition.sizes
    records: list[RunRecord] = []
    for t in range(steps):
        beta_before = runner.beta
        t0 = time.perf_counter()
        try:
            diag = runner.advance()
        except NumericError as e:
            raise RunAborted(step=e.step if e.step is not None else t, cause=e, records=records) from e
        micros = (time.perf_counter() - t0) * 1e6
        rec = _make_record(t, diag, beta_before, sizes, stream.is_switch(t), micros)
        records.append(rec)
        if writer is not None:
            writer.write(rec)
    return records
