import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stepadapt import BlockPartition, ConfigError, StepSizeMap, map_alpha, map_jacobian_diag
from stepadapt.stepsize import map_alpha_blocks


def exp_map(n, m=1):
    p = BlockPartition.scalar(n) if m == 1 else BlockPartition.contiguous(n, m)
    return StepSizeMap(kind="exponential", partition=p)


def test_exponential_zero_beta_gives_ones():
    np.testing.assert_array_equal(map_alpha(exp_map(4), [0.0]), np.ones(4))


def test_exponential_log_inverse():
    a = map_alpha(exp_map(3), [math.log(1e-3)])
    np.testing.assert_allclose(a, 1e-3 * np.ones(3), rtol=1e-15)


def test_identity_map():
    m = StepSizeMap(kind="identity", partition=BlockPartition.scalar(2))
    np.testing.assert_array_equal(map_alpha(m, [0.5]), [0.5, 0.5])
    np.testing.assert_array_equal(map_jacobian_diag(m, [0.5]), [1.0, 1.0])


def test_jacobian_exponential_at_zero():
    np.testing.assert_array_equal(map_jacobian_diag(exp_map(3), [0.0]), np.ones(3))


def test_jacobian_two_blocks():
    m = StepSizeMap(kind="exponential", partition=BlockPartition(np.array([0, 1, 0]), 2))
    got = map_jacobian_diag(m, [math.log(2.0), math.log(3.0)])
    np.testing.assert_allclose(got, [2.0, 3.0, 2.0], rtol=1e-15)


def test_unknown_kind_rejected():
    with pytest.raises(ConfigError):
        StepSizeMap(kind="sigmoid", partition=BlockPartition.scalar(2))


@given(st.lists(st.floats(-5, 2.9), min_size=1, max_size=4))
@settings(max_examples=50)
def test_exponential_jacobian_equals_alpha(betas):
    m = exp_map(2 * len(betas), len(betas))
    np.testing.assert_array_equal(map_jacobian_diag(m, betas), map_alpha(m, betas))


@given(st.lists(st.floats(-4, 2), min_size=1, max_size=4), st.integers(0, 100))
@settings(max_examples=50)
def test_central_difference_matches_jacobian(betas, seed):
    mp = exp_map(len(betas) * 2, len(betas))
    beta = np.asarray(betas)
    eps = 1e-6
    jac = map_jacobian_diag(mp, beta)
    for j in range(len(betas)):
        e = np.zeros(len(betas))
        e[j] = eps
        fd = (map_alpha(mp, beta + e) - map_alpha(mp, beta - e)) / (2 * eps)
        mask = mp.partition.assignment == j
        np.testing.assert_allclose(fd[mask], jac[mask], rtol=1e-6)
        np.testing.assert_allclose(fd[~mask], 0.0, atol=1e-12)


@given(st.floats(-3, 2), st.floats(-1, 1))
@settings(max_examples=50)
def test_multiplicative_additive_duality(beta, c):
    mp = StepSizeMap(kind="exponential", partition=BlockPartition(np.array([0, 1, 1]), 2))
    b = np.array([beta, 0.3])
    shifted = map_alpha(mp, b + c * np.array([0.0, 1.0]))
    base = map_alpha(mp, b)
    np.testing.assert_allclose(shifted[1:], base[1:] * math.exp(c), rtol=1e-12)
    np.testing.assert_allclose(shifted[0], base[0], rtol=0)


def test_clamp_is_logged_not_silent(caplog):
    mp = exp_map(2)
    with caplog.at_level(logging.WARNING, logger="stepadapt.stepsize"):
        a = map_alpha_blocks(mp, np.array([500.0]))
    assert a[0] == pytest.approx(math.exp(20.0))
    assert any("clamped" in r.message for r in caplog.records)
    caplog.clear()
    with caplog.at_level(logging.WARNING, logger="stepadapt.stepsize"):
        map_alpha_blocks(mp, np.array([-500.0]))
    assert any("clamped" in r.message for r in caplog.records)
