"""Base weight updates: SGD, SGDm, RMSProp, AdamW, Lion.

Each step takes a per-weight step-size vector alpha and returns the new state
plus the exact weight displacement delta_w; the Hessian-free trace engines
consume (1 - kappa*alpha) and delta_w as their per-step Jacobian surrogates.

Momentum timing: the printed pseudocode updates m_{t+1} and then uses m_t in
delta_w for SGDm/AdamW, while its bias correction presumes the fresh
accumulator. Default here is the standard semantics (fresh m', v' in
delta_w); `momentum_timing="pre"` selects the printed ordering. Lion always
uses the pre-update momentum — that is the Lion convention, not a typo.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, NumericError

SGD = "sgd"
SGDM = "sgdm"
RMSPROP = "rmsprop"
ADAMW = "adamw"
LION = "lion"

BASE_KINDS = (SGD, SGDM, RMSPROP, ADAMW, LION)
_USES_V = (RMSPROP, ADAMW)

# guard inside sqrt(v + EPS_DEN); v = 0 at t = 1 otherwise divides by zero
EPS_DEN = 1e-12


@dataclass(frozen=True)
class BaseConfig:
    kind: str = SGD
    rho: float = 0.9          # momentum decay
    lam: float = 0.999        # squared-gradient trace decay
    kappa: float = 0.0        # decoupled weight decay
    c: float = 0.9            # Lion interpolation
    bias_correction: bool = True
    momentum_timing: str = "post"

    def __post_init__(self):
        if self.kind not in BASE_KINDS:
            raise ConfigError(f"unknown base kind {self.kind!r}")
        if not (0.0 <= self.rho < 1.0 and 0.0 <= self.lam < 1.0 and 0.0 <= self.c < 1.0):
            raise ConfigError("rho, lam, c must lie in [0, 1)")
        if self.kappa < 0.0:
            raise ConfigError("kappa must be >= 0")
        if self.momentum_timing not in ("post", "pre"):
            raise ConfigError("momentum_timing must be 'post' or 'pre'")


@dataclass(frozen=True)
class BaseState:
    w: np.ndarray
    m: np.ndarray
    v: np.ndarray
    t: int = 0


def init_base_state(w0: np.ndarray) -> BaseState:
    w0 = np.asarray(w0, dtype=np.float64)
    return BaseState(w=w0.copy(), m=np.zeros_like(w0), v=np.zeros_like(w0), t=0)


def base_step(cfg: BaseConfig, state: BaseState, grad: np.ndarray, alpha):
    """One base update. Returns (new state, delta_w) with w' = w + delta_w.

    alpha may be a float (scalar step size) or an (n,)-vector; numpy
    broadcasting covers both.
    """
    w, m, v = state.w, state.m, state.v
    step = state.t + 1

    m_new = cfg.rho * m + (1.0 - cfg.rho) * grad
    v_new = cfg.lam * v + (1.0 - cfg.lam) * grad * grad if cfg.kind in _USES_V else v

    pre = cfg.momentum_timing == "pre"
    if cfg.kind == SGD:
        direction = grad
    elif cfg.kind == SGDM:
        direction = m if pre else m_new
    elif cfg.kind == RMSPROP:
        direction = grad / np.sqrt((v if pre else v_new) + EPS_DEN)
    elif cfg.kind == ADAMW:
        mu = np.sqrt(1.0 - cfg.lam ** step) / (1.0 - cfg.rho ** step) if cfg.bias_correction else 1.0
        ms, vs = (m, v) if pre else (m_new, v_new)
        direction = mu * ms / np.sqrt(vs + EPS_DEN)
    else:  # lion; Sign(0) = 0
        direction = np.sign(cfg.c * m + (1.0 - cfg.c) * grad)

    if cfg.kappa != 0.0:
        delta_w = -alpha * direction - (cfg.kappa * alpha) * w
    else:
        delta_w = -alpha * direction
    if not np.isfinite(delta_w).all():
        raise NumericError("non-finite base update", step=state.t)

    return replace(state, w=w + delta_w, m=m_new, v=v_new, t=step), delta_w


def hf_jacobians(cfg: BaseConfig, state: BaseState, alpha, delta_w):
    """Hessian-free Jacobian surrogates for the trace recursion.

    a_diag = 1 - kappa*alpha is the zeroed-Hessian dw'/dw diagonal; b_col is
    delta_w itself, the per-weight dw'/dbeta under the exponential map.
    """
    n = state.w.shape[0]
    a_diag = np.broadcast_to(np.asarray(1.0 - cfg.kappa * np.asarray(alpha)), (n,)).astype(np.float64)
    return a_diag, delta_w
