"""Unit tests for the `reward` module."""

import numpy as np
import pytest

from tpsr.envs.oracle import oracle_reward
from tpsr.errors import InsufficientSamples
from tpsr.planning.reward import RewardModel, learn_reward, reward_residuals


def test_learn_reward_recovers_linear_rewards(rng):
    """Test that noise-free linear rewards are recovered."""

    eta = np.array([[1.0, -2.0, 0.5], [0.0, 3.0, 1.0]])
    states = rng.dirichlet(np.ones(3), size=200)
    actions = rng.integers(2, size=200)
    rewards = np.einsum("nd,nd->n", states, eta[actions])

    reward = learn_reward(states, actions, rewards, num_actions=2)

    assert np.allclose(reward.eta, eta, atol=1e-5)
    assert np.allclose(reward.expected(states[:3]), states[:3] @ eta.T, atol=1e-5)


def test_learn_reward_too_few_samples(rng):
    """Test that an action with fewer samples than dimensions is reported."""

    states = rng.dirichlet(np.ones(3), size=10)
    actions = np.array([0] * 8 + [1] * 2)

    with pytest.raises(InsufficientSamples) as error:
        learn_reward(states, actions, np.zeros(10), num_actions=2)

    assert error.value.action == 1
    assert error.value.count == 2


def test_oracle_reward_is_expected_reward(tiger):
    """Test that the oracle reward gives the belief-weighted reward."""

    reward = oracle_reward(tiger)
    belief = np.array([0.25, 0.75])

    assert np.allclose(reward.expected(belief), belief @ tiger.reward)
    assert reward.num_actions == 3


def test_scaled():
    """Test that scaling multiplies every reward vector."""

    assert np.array_equal(RewardModel([[1.0, 2.0]]).scaled(3.0).eta, [[3.0, 6.0]])


def test_reward_residuals(rng):
    """Test the per-action residual summary."""

    reward = RewardModel(np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]))
    states = np.array([[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]])
    actions = np.array([0, 0, 1])
    rewards = np.array([1.0, 1.0, 0.5])

    summary = reward_residuals(reward, states, actions, rewards)

    assert summary["action"].tolist() == [0, 1, 2]
    assert summary["count"].tolist() == [2, 1, 0]
    assert np.allclose(summary["rms"], [np.sqrt(0.5), 0.0, 0.0])
    assert summary["eta_1"].tolist() == [0.0, 1.0, 1.0]
