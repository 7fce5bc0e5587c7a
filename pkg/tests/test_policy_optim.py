import math

import numpy as np
import pytest

from onlineaug.policy import PolicyParams, SampleCounts, log_prob_gradient, probabilities
from onlineaug.policy_optim import AdamState, adam_ascent_step, adam_step_bound, reinforce_gradient


def scalar_adam(theta, grads, lr=0.05, b1=0.5, b2=0.999, eps=1e-8):
    """Textbook Adam, one coordinate at a time, ascending."""
    theta = list(theta)
    m = [0.0] * len(theta)
    v = [0.0] * len(theta)
    for t, g in enumerate(grads, start=1):
        for i, gi in enumerate(g):
            m[i] = b1 * m[i] + (1 - b1) * gi
            v[i] = b2 * v[i] + (1 - b2) * gi * gi
            mh = m[i] / (1 - b1**t)
            vh = v[i] / (1 - b2**t)
            theta[i] += lr * mh / (math.sqrt(vh) + eps)
    return theta


def test_all_equal_accuracies_give_zero():
    p = PolicyParams(np.zeros(4))
    cs = [SampleCounts([1, 2, 0, 1]), SampleCounts([0, 0, 4, 0])]
    assert not reinforce_gradient(p, cs, [0.7, 0.7]).any()


def test_single_trajectory_with_baseline_is_zero():
    p = PolicyParams(np.random.default_rng(0).normal(size=6))
    assert not reinforce_gradient(p, [SampleCounts([1, 0, 2, 0, 0, 3])], [0.9]).any()


def test_two_trajectory_expansion():
    p = PolicyParams(np.array([0.3, -0.2, 1.0]))
    c1, c2 = SampleCounts([2, 1, 0]), SampleCounts([0, 1, 2])
    g1, g2 = log_prob_gradient(p, c1), log_prob_gradient(p, c2)
    want = 0.5 * (0.1 * g1 + (-0.1) * g2)
    np.testing.assert_allclose(reinforce_gradient(p, [c1, c2], [0.8, 0.6]), want, rtol=1e-12, atol=1e-15)


def test_without_baseline_uses_raw_accuracy():
    p = PolicyParams(np.zeros(2))
    c = SampleCounts([1, 0])
    np.testing.assert_allclose(reinforce_gradient(p, [c], [0.5], baseline=False), 0.5 * log_prob_gradient(p, c))


def test_length_mismatch():
    with pytest.raises(ValueError):
        reinforce_gradient(PolicyParams(np.zeros(2)), [SampleCounts([1, 0])], [0.1, 0.2])
    with pytest.raises(ValueError):
        reinforce_gradient(PolicyParams(np.zeros(2)), [], [])


def test_monte_carlo_ascent_direction():
    """2-op bandit where op 0 always scores higher: mean gradient on theta_0 is positive."""
    rng = np.random.default_rng(0)
    p = PolicyParams(np.zeros(2))
    probs = probabilities(p)
    total = np.zeros(2)
    steps, n_traj, samples = 10_000, 4, 8
    for _ in range(steps):
        counts = [SampleCounts(rng.multinomial(samples, probs)) for _ in range(n_traj)]
        accs = [c.counts[0] / samples + 0.01 * rng.normal() for c in counts]
        total += reinforce_gradient(p, counts, accs)
    mean = total / steps
    assert mean[0] > 0 > mean[1]
    # the component sum vanishes at theta = 0 by symmetry; check it is small relative to the signal
    assert abs(mean.sum()) < 0.2 * mean[0]


def test_first_adam_step_is_signlike():
    g = np.array([3.0, -0.001, 0.0, 250.0])
    p, s = adam_ascent_step(PolicyParams(np.zeros(4)), g, AdamState.zeros(4))
    np.testing.assert_allclose(p.theta, 0.05 * g / (np.abs(g) + 1e-8), rtol=1e-12)
    assert s.t == 1


def test_zero_gradient_from_fresh_state():
    s0 = AdamState.zeros(3)
    p, s = adam_ascent_step(PolicyParams([1.0, 2.0, 3.0]), np.zeros(3), s0)
    assert p.theta.tolist() == [1.0, 2.0, 3.0]
    assert not s.m.any() and not s.v.any() and s.t == 1


def test_three_steps_against_scalar_oracle():
    grads = [np.array([0.2, -1.0, 3.0]), np.array([-0.5, -0.7, 0.1]), np.array([0.05, 2.0, -4.0])]
    p, s = PolicyParams([0.1, 0.0, -0.3]), AdamState.zeros(3)
    for g in grads:
        p, s = adam_ascent_step(p, g, s)
    want = scalar_adam([0.1, 0.0, -0.3], grads)
    assert np.max(np.abs(p.theta - want)) <= 1e-12


def test_rejects_nonfinite_gradient():
    with pytest.raises(ValueError):
        adam_ascent_step(PolicyParams(np.zeros(2)), np.array([np.inf, 0.0]), AdamState.zeros(2))


def test_state_copy_is_independent():
    s = AdamState.zeros(2)
    c = s.copy()
    c.m[0] = 1.0
    assert s.m[0] == 0.0


def test_step_bound_holds_and_can_exceed_lr():
    rng = np.random.default_rng(0)
    worst_ratio, exceeded = 0.0, False
    for trial in range(300):
        s = AdamState.zeros(1)
        p = PolicyParams([0.0])
        scale = rng.choice([1e-3, 1.0, 1e3])
        # large early gradients then small ones stress the m/sqrt(v) ratio
        seq = rng.normal(size=30) * scale * np.exp(-rng.uniform(0, 1) * np.arange(30))
        if trial % 3 == 0:
            seq = scale * np.r_[np.zeros(20), np.ones(10)]
        for g in seq:
            before = p.theta[0]
            p, s = adam_ascent_step(p, np.array([g]), s)
            step = abs(p.theta[0] - before)
            assert step <= adam_step_bound(s) * (1 + 1e-9)
            worst_ratio = max(worst_ratio, step / s.lr)
            exceeded |= step > s.lr * 1.01
    # with beta1 = 0.5 and beta2 = 0.999 the per-step move is not capped at lr
    assert exceeded and worst_ratio > 2.0


def test_bound_value():
    s = AdamState.zeros(1)
    s.t = 1
    assert adam_step_bound(s) == pytest.approx(0.05)
    s.t = 10_000
    limit = 0.05 * 0.5 / math.sqrt(0.001) / math.sqrt(1 - 0.25 / 0.999)
    assert adam_step_bound(s) == pytest.approx(limit, rel=1e-3)
