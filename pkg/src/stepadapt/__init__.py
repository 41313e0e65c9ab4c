"""Online step-size adaptation wrapped around first-order optimizers.

A beta vector (one entry per weight block) is mapped through an exponential
function to per-weight step sizes; a trace of discounted weight sensitivities
turns each new gradient into a surrogate meta-gradient that a second
optimizer applies to beta. Exact, 2x2, L, and Hessian-free trace recursions
are provided, together with the classic per-weight adapters they reduce to
and finite-difference oracles that check the traces against brute force.
"""

from .base_opt import BaseConfig, BaseState, base_step, hf_jacobians, init_base_state
from .blocks import BlockPartition, block_sum, broadcast_blocks, derive_rng
from .engine import (EngineConfig, EngineRunner, ExactTrace, HFTrace, SgdTrace,
                     engine_step, exact_step, hf_step, l_approx_step, run, sgd2x2_step)
from .errors import (CapabilityError, ConfigError, DimensionError, NumericError, RunAborted)
from .meta_opt import MetaConfig, MetaState, init_meta_state, meta_step
from .stepsize import StepSizeMap, map_alpha, map_jacobian_diag
from .tasks import LossOracle, MlpShape, StreamConfig, make_stream, mlp_loss

__all__ = [
    "BaseConfig", "BaseState", "base_step", "hf_jacobians", "init_base_state",
    "BlockPartition", "block_sum", "broadcast_blocks", "derive_rng",
    "EngineConfig", "EngineRunner", "ExactTrace", "HFTrace", "SgdTrace",
    "engine_step", "exact_step", "hf_step", "l_approx_step", "run", "sgd2x2_step",
    "CapabilityError", "ConfigError", "DimensionError", "NumericError", "RunAborted",
    "MetaConfig", "MetaState", "init_meta_state", "meta_step",
    "StepSizeMap", "map_alpha", "map_jacobian_diag",
    "LossOracle", "MlpShape", "StreamConfig", "make_stream", "mlp_loss",
]

__version__ = "0.1.0"
