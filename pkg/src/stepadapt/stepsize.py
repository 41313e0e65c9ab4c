"""The map from meta-parameters beta to per-weight step sizes alpha.

The exponential map keeps every step size strictly positive and turns
multiplicative changes of alpha into additive changes of beta; the identity
map exists solely to reproduce the additive hypergradient baseline.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .blocks import BlockPartition, as_vector, broadcast_blocks
from .errors import ConfigError, NumericError

log = logging.getLogger(__name__)

EXPONENTIAL = "exponential"
IDENTITY = "identity"

# Clamp beta before exponentiation so alpha never overflows; exceeding the
# window is logged, never silent.
BETA_MIN = -60.0
BETA_MAX = 20.0


@dataclass(frozen=True)
class StepSizeMap:
    kind: str
    partition: BlockPartition

    def __post_init__(self):
        if self.kind not in (EXPONENTIAL, IDENTITY):
            raise ConfigError(f"unknown step-size map kind {self.kind!r}")

    @property
    def beta_dim(self) -> int:
        return self.partition.block_count


def _clamped(beta: np.ndarray) -> np.ndarray:
    if beta.max(initial=-np.inf) > BETA_MAX or beta.min(initial=np.inf) < BETA_MIN:
        log.warning("beta clamped to [%g, %g] before exponentiation (max=%g, min=%g)",
                    BETA_MIN, BETA_MAX, beta.max(), beta.min())
        return np.clip(beta, BETA_MIN, BETA_MAX)
    return beta


def map_alpha_blocks(m: StepSizeMap, beta: np.ndarray) -> np.ndarray:
    """Per-block alpha, length m (the broadcast-free fast path)."""
    beta = as_vector(beta, m.beta_dim)
    if m.kind == EXPONENTIAL:
        alpha = np.exp(_clamped(beta))
    else:
        alpha = beta.copy()
    if not np.isfinite(alpha).all():
        raise NumericError("non-finite step size produced by the beta->alpha map")
    return alpha


def map_alpha(m: StepSizeMap, beta: np.ndarray) -> np.ndarray:
    """alpha[i] = exp(beta[block(i)]) (exponential) or beta[block(i)] (identity)."""
    return broadcast_blocks(map_alpha_blocks(m, beta), m.partition)


def map_jacobian_blocks(m: StepSizeMap, beta: np.ndarray) -> np.ndarray:
    beta = as_vector(beta, m.beta_dim)
    if m.kind == EXPONENTIAL:
        return np.exp(_clamped(beta))
    return np.ones_like(beta)


def map_jacobian_diag(m: StepSizeMap, beta: np.ndarray) -> np.ndarray:
    """Per-coordinate d alpha_i / d beta_{block(i)}.

    The Jacobian has exactly one nonzero per row under the block structure, so
    the diagonal-style vector is the whole object. For the exponential map it
    equals map_alpha; for identity it is all ones.
    """
    return broadcast_blocks(map_jacobian_blocks(m, beta), m.partition)
