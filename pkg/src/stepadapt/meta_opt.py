"""Meta updates over beta, consuming the block-grouped surrogate gradient z.

The surrogate z = H^T grad f is fed to SGD / Adam / Lion exactly like a
conventional gradient. No weight decay here: the meta space is
low-dimensional, so the regularizers that matter for the base weights are
dropped.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .base_opt import EPS_DEN
from .errors import ConfigError, NumericError

META_SGD = "sgd"
META_ADAM = "adam"
META_LION = "lion"

META_KINDS = (META_SGD, META_ADAM, META_LION)


@dataclass(frozen=True)
class MetaConfig:
    kind: str = META_ADAM
    eta: float = 1e-3
    rho_bar: float = 0.9
    lam_bar: float = 0.999
    c_bar: float = 0.9

    def __post_init__(self):
        if self.kind not in META_KINDS:
            raise ConfigError(f"unknown meta kind {self.kind!r}")
        if self.eta < 0.0:
            raise ConfigError("eta must be >= 0")
        if not (0.0 <= self.rho_bar < 1.0 and 0.0 <= self.lam_bar < 1.0 and 0.0 <= self.c_bar < 1.0):
            raise ConfigError("rho_bar, lam_bar, c_bar must lie in [0, 1)")


@dataclass(frozen=True)
class MetaState:
    beta: np.ndarray
    m_bar: np.ndarray
    v_bar: np.ndarray
    t: int = 0


def init_meta_state(beta0: np.ndarray) -> MetaState:
    beta0 = np.atleast_1d(np.asarray(beta0, dtype=np.float64))
    return MetaState(beta=beta0.copy(), m_bar=np.zeros_like(beta0), v_bar=np.zeros_like(beta0), t=0)


def meta_step(cfg: MetaConfig, state: MetaState, z: np.ndarray) -> MetaState:
    """One meta update from the surrogate gradient z (length m)."""
    beta, m_bar, v_bar = state.beta, state.m_bar, state.v_bar
    z = np.asarray(z, dtype=np.float64)
    step = state.t + 1

    m_new = cfg.rho_bar * m_bar + (1.0 - cfg.rho_bar) * z
    v_new = cfg.lam_bar * v_bar + (1.0 - cfg.lam_bar) * z * z if cfg.kind == META_ADAM else v_bar

    if cfg.kind == META_SGD:
        beta_new = beta - cfg.eta * z
    elif cfg.kind == META_ADAM:
        mu = np.sqrt(1.0 - cfg.lam_bar ** step) / (1.0 - cfg.rho_bar ** step)
        # m' = v' = 0 gives exactly zero (the limit value), so z = 0 leaves beta unchanged
        beta_new = beta - cfg.eta * mu * m_new / np.sqrt(v_new + EPS_DEN)
    else:  # lion; pre-update momentum, Sign(0) = 0
        beta_new = beta - cfg.eta * np.sign(cfg.c_bar * m_bar + (1.0 - cfg.c_bar) * z)

    if not np.isfinite(beta_new).all():
        raise NumericError("non-finite meta update", step=state.t)
    return replace(state, beta=beta_new, m_bar=m_new, v_bar=v_new, t=step)
