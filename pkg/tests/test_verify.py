import math

import numpy as np
import pytest

from stepadapt import (BaseConfig, BlockPartition, EngineConfig, EngineRunner,
                       LossOracle, MetaConfig, StepSizeMap, StreamConfig, make_stream)
from stepadapt.errors import ConfigError
from stepadapt.verify import (equivalence_run, forward_view_beta_run, forward_view_h,
                              forward_view_oracle, grad_check, run_verification_suite)


def exact_cfg(n, gamma, eta, **kw):
    return EngineConfig(variant="exact_full_g", gamma=gamma, base=BaseConfig(kind="sgd"),
                        meta=MetaConfig(kind="sgd", eta=eta),
                        map=StepSizeMap(kind="exponential",
                                        partition=BlockPartition.scalar(n)), **kw)


@pytest.fixture(scope="module")
def quad3():
    return make_stream(StreamConfig(kind="noisy_quadratic", dimension=3, noise=0.0, seed=11))


def test_tau1_is_single_term(quad3):
    gamma = 0.9
    cfg = exact_cfg(3, gamma, 1e-4)
    H_hat, g1 = forward_view_h(cfg, quad3, 1, 1e-5, alpha0=0.05)
    # single-term sum: (1-gamma) * dw_1/dbeta_0 = (1-gamma) * (-alpha * grad_0)
    g0 = quad3.next_loss(0).grad(quad3.initial_weights())
    expect = (1 - gamma) * (-0.05 * g0)
    np.testing.assert_allclose(H_hat[:, 0], expect, rtol=1e-6)


def test_gamma_zero_only_last_term_survives(quad3):
    cfg = exact_cfg(3, 0.0, 1e-4)
    tau = 7
    H_hat, _ = forward_view_h(cfg, quad3, tau, 1e-5, alpha0=0.05)
    # replay to step tau-1 and measure the one-step derivative directly
    r = EngineRunner(cfg, quad3, alpha0=0.05)
    for _ in range(tau - 1):
        r.advance()
    g = quad3.next_loss(tau - 1).grad(r.w)
    alpha = math.exp(r.beta[0])
    np.testing.assert_allclose(H_hat[:, 0], -alpha * g, rtol=1e-6)


def test_exact_engine_matches_oracle_tau20(quad3):
    cfg = exact_cfg(3, 0.9, 1e-4)
    tau = 20
    z_hat = forward_view_oracle(cfg, quad3, tau, 1e-5, alpha0=0.05)
    r = EngineRunner(cfg, quad3, alpha0=0.05)
    for _ in range(tau):
        r.advance()
    z_eng = np.array([r.trace.X @ quad3.next_loss(tau).grad(r.w)])
    assert abs(z_eng[0] - z_hat[0]) / abs(z_hat[0]) < 1e-4


def test_oracle_richardson_in_eps(quad3):
    # halving eps changes the estimate by O(eps^2) on quadratic streams
    cfg = exact_cfg(3, 0.9, 1e-3)
    zs = {}
    for eps in (4e-4, 2e-4, 1e-4):
        zs[eps] = forward_view_oracle(cfg, quad3, 8, eps, alpha0=0.05)[0]
    d1 = abs(zs[4e-4] - zs[2e-4])
    d2 = abs(zs[2e-4] - zs[1e-4])
    assert d2 <= d1 / 2.0 or d1 < 1e-12


def test_backward_forward_gap_shrinks_with_eta(quad3):
    T = 40
    gaps = []
    for eta in (1e-2, 1e-3, 1e-4):
        cfg = exact_cfg(3, 0.9, eta)
        r = EngineRunner(cfg, quad3, alpha0=0.05)
        for _ in range(T):
            r.advance()
        b_fwd = forward_view_beta_run(cfg, quad3, T, 1e-6, alpha0=0.05)
        gaps.append(abs(float(r.beta[0]) - b_fwd) / eta)
    assert gaps[0] > gaps[1] > gaps[2]


def test_grad_check_quadratic_and_zero():
    st = make_stream(StreamConfig(kind="noisy_quadratic", dimension=5, noise=0.3, seed=2))
    assert grad_check(st.next_loss(0), st.initial_weights(), 1e-5) < 1e-8
    zero = LossOracle(value=lambda w: 0.0, grad=lambda w: np.zeros(3))
    assert grad_check(zero, np.ones(3), 1e-5) == 0.0


def test_grad_check_eps_range_enforced():
    zero = LossOracle(value=lambda w: 0.0, grad=lambda w: np.zeros(2))
    with pytest.raises(ConfigError):
        grad_check(zero, np.zeros(2), 1e-2)


def test_equivalence_run_self_is_zero():
    sc = StreamConfig(kind="noisy_quadratic", dimension=3, noise=0.2, seed=5)
    cfg = exact_cfg(3, 0.9, 1e-3)
    A = EngineRunner(cfg, make_stream(sc), alpha0=0.05)
    B = EngineRunner(cfg, make_stream(sc), alpha0=0.05)
    dev, first = equivalence_run(A, B, 50)
    assert dev == 0.0 and first is None


def test_equivalence_run_reports_first_divergence():
    sc = StreamConfig(kind="noisy_quadratic", dimension=3, noise=0.2, seed=5)
    A = EngineRunner(exact_cfg(3, 0.9, 1e-3), make_stream(sc), alpha0=0.05)
    B = EngineRunner(exact_cfg(3, 0.9, 2e-3), make_stream(sc), alpha0=0.05)
    dev, first = equivalence_run(A, B, 50)
    assert dev > 0.0
    # identical until the traces first feed beta: divergence after step 1
    assert first == 1


def test_oracle_tau_and_eps_validation(quad3):
    cfg = exact_cfg(3, 0.9, 1e-3)
    with pytest.raises(ConfigError):
        forward_view_h(cfg, quad3, 0, 1e-5)
    with pytest.raises(ConfigError):
        forward_view_h(cfg, quad3, 3, 1.0)


def test_verification_suite_all_pass():
    results = run_verification_suite(quick=True)
    assert results, "suite must produce results"
    for name, ok, detail in results:
        assert ok, f"{name}: {detail}"
