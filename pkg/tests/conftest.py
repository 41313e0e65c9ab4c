import numpy as np
import pytest

from stepadapt import (BaseConfig, BlockPartition, EngineConfig, MetaConfig,
                       StepSizeMap, StreamConfig)


@pytest.fixture
def quad3_stream_cfg():
    return StreamConfig(kind="noisy_quadratic", dimension=3, noise=0.0, seed=11)


def scalar_map(n, kind="exponential"):
    return StepSizeMap(kind=kind, partition=BlockPartition.scalar(n))


def weightwise_map(n, kind="exponential"):
    return StepSizeMap(kind=kind, partition=BlockPartition.weightwise(n))


def sgd_engine(variant, n, gamma, eta, map_kind="exponential", **kw):
    return EngineConfig(variant=variant, gamma=gamma,
                        base=BaseConfig(kind="sgd"),
                        meta=MetaConfig(kind="sgd", eta=eta),
                        map=scalar_map(n, map_kind), **kw)
