"""Reference algorithms the trace engines reduce to.

IDBD is implemented exactly as printed — beta first, then weights, with the
freshly updated alpha in the weight and trace updates — so the equivalence
tests isolate the engine reduction rather than ordering noise. Hypergradient
descent is the additive (identity-map) form only; the multiplicative variant
is just the engine with an exponential map at gamma = 0.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .base_opt import BaseConfig, BaseState, base_step, init_base_state
from .errors import CapabilityError, ConfigError, NumericError, RunAborted
from .records import RunRecord
from .tasks import LossOracle, StreamConfig, make_stream


@dataclass(frozen=True)
class IdbdState:
    """Weightwise step-size adapter state (beta has the weight dimension)."""

    w: np.ndarray
    beta: np.ndarray
    h: np.ndarray
    eta: float


def init_idbd_state(w0, beta0, eta: float) -> IdbdState:
    w0 = np.asarray(w0, dtype=np.float64)
    beta0 = np.broadcast_to(np.asarray(beta0, dtype=np.float64), w0.shape).copy()
    return IdbdState(w=w0.copy(), beta=beta0, h=np.zeros_like(w0), eta=eta)


def idbd_step(state: IdbdState, a: np.ndarray, b: float) -> IdbdState:
    """One step on the loss 0.5*(a.w - b)^2, rectified trace decay."""
    a = np.asarray(a, dtype=np.float64)
    g = (a @ state.w - b) * a
    beta = state.beta - state.eta * state.h * g
    alpha = np.exp(beta)
    w = state.w - alpha * g
    decay = np.maximum(1.0 - alpha * a * a, 0.0)
    h = decay * state.h - alpha * g
    return replace(state, w=w, beta=beta, h=h)


def idbd_nn_step(state: IdbdState, oracle: LossOracle) -> IdbdState:
    """Beyond-quadratic extension: full Hessian action via hvp, no rectifier."""
    if not oracle.has_hvp:
        raise CapabilityError("idbd_nn_step needs Hessian-vector products")
    g = oracle.grad(state.w)
    beta = state.beta - state.eta * state.h * g
    alpha = np.exp(beta)
    w = state.w - alpha * g
    h = state.h - alpha * oracle.hvp(state.w, state.h) - alpha * g
    return replace(state, w=w, beta=beta, h=h)


@dataclass(frozen=True)
class HypergradientState:
    """Scalar additive step size with one-step derivative memory."""

    w: np.ndarray
    beta: float
    h: np.ndarray  # dw_t / dbeta_{t-1}; zero before the first step
    eta: float
    m: np.ndarray = None
    v: np.ndarray = None
    t: int = 0


def init_hypergradient_state(w0, beta0: float, eta: float) -> HypergradientState:
    w0 = np.asarray(w0, dtype=np.float64)
    return HypergradientState(w=w0.copy(), beta=float(beta0), h=np.zeros_like(w0), eta=eta,
                              m=np.zeros_like(w0), v=np.zeros_like(w0), t=0)


def hypergradient_step(state: HypergradientState, oracle: LossOracle,
                       base: BaseConfig | None = None) -> HypergradientState:
    """Additive step-size update minimizing the immediate next loss.

    beta' = beta - eta * grad f_t(w_t) . (dw_t/dbeta_{t-1}); the stored
    derivative is refreshed to dw_{t+1}/dbeta_t after the base update. With no
    stored derivative yet (h = 0) the first step leaves beta unchanged.
    """
    if base is None:
        base = BaseConfig(kind="sgd")
    g = oracle.grad(state.w)
    beta = state.beta - state.eta * float(g @ state.h)
    alpha = state.beta  # additive map, pre-update beta drives the weights
    bstate = BaseState(w=state.w, m=state.m, v=state.v, t=state.t)
    bnew, delta_w = base_step(base, bstate, g, alpha)
    if base.kind == "sgd":
        h = -(g + base.kappa * state.w)
    else:
        if alpha == 0.0:
            raise NumericError("additive hypergradient hit alpha = 0", step=state.t)
        h = delta_w / alpha  # dw_{t+1}/dbeta_t under the identity map
    return replace(state, w=bnew.w, beta=beta, h=h, m=bnew.m, v=bnew.v, t=bnew.t)


# --------------------------------------------------------------------------
# runner wrappers sharing the equivalence-harness protocol (.advance, .w, .beta)


class IdbdRunner:
    def __init__(self, stream, beta0, eta: float, w0=None):
        if isinstance(stream, StreamConfig):
            stream = make_stream(stream)
        if stream.config.kind != "idbd_features":
            raise ConfigError("IdbdRunner runs on the idbd_features stream")
        self.stream = stream
        self.state = init_idbd_state(stream.initial_weights() if w0 is None else w0, beta0, eta)
        self.t = 0

    @property
    def w(self):
        return self.state.w

    @property
    def beta(self):
        return self.state.beta

    def advance(self):
        a, b = self.stream.features(self.t)
        self.state = idbd_step(self.state, a, b)
        self.t += 1


class IdbdNNRunner:
    def __init__(self, stream, beta0, eta: float, w0=None):
        if isinstance(stream, StreamConfig):
            stream = make_stream(stream)
        self.stream = stream
        self.state = init_idbd_state(stream.initial_weights() if w0 is None else w0, beta0, eta)
        self.t = 0

    @property
    def w(self):
        return self.state.w

    @property
    def beta(self):
        return self.state.beta

    def advance(self):
        self.state = idbd_nn_step(self.state, self.stream.next_loss(self.t))
        self.t += 1


class HypergradientRunner:
    def __init__(self, stream, beta0: float, eta: float, base: BaseConfig | None = None, w0=None):
        if isinstance(stream, StreamConfig):
            stream = make_stream(stream)
        self.stream = stream
        self.base = base or BaseConfig(kind="sgd")
        self.state = init_hypergradient_state(stream.initial_weights() if w0 is None else w0, beta0, eta)
        self.t = 0

    @property
    def w(self):
        return self.state.w

    @property
    def beta(self):
        return np.array([self.state.beta])

    def advance(self):
        self.state = hypergradient_step(self.state, self.stream.next_loss(self.t), self.base)
        self.t += 1


def fixed_step_run(base: BaseConfig, alpha: float, stream, steps: int,
                   seed: int | None = None, w0=None, writer=None) -> list[RunRecord]:
    """Plain base-optimizer run at a constant step size, shared record schema."""
    if alpha <= 0:
        raise ConfigError("fixed step size must be > 0")
    if steps < 1:
        raise ConfigError("steps must be >= 1")
    if isinstance(stream, StreamConfig):
        stream = make_stream(stream, seed=seed)
    state = init_base_state(stream.initial_weights() if w0 is None else np.asarray(w0, dtype=np.float64))
    beta = float(np.log(alpha))
    records: list[RunRecord] = []
    for t in range(steps):
        t0 = time.perf_counter()
        oracle = stream.next_loss(t)
        try:
            loss = oracle.value(state.w)
            if not np.isfinite(loss):
                raise NumericError("non-finite loss", step=t)
            g = oracle.grad(state.w)
            state, _ = base_step(base, state, g, alpha)
        except NumericError as e:
            raise RunAborted(step=t, cause=e, records=records) from e
        micros = (time.perf_counter() - t0) * 1e6
        rec = RunRecord(
            step=t, loss=loss, alpha_mean=alpha, alpha_min=alpha, alpha_max=alpha,
            alpha_blocks=np.array([alpha]), beta_blocks=np.array([beta]),
            z_norm=0.0, switch=1 if stream.is_switch(t) else 0, step_micros=micros)
        records.append(rec)
        if writer is not None:
            writer.write(rec)
    return records
