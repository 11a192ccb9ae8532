"""Unit tests for the `pipeline` module."""

import itertools

import numpy as np
import pytest

from tpsr.envs.exact import enumerate_windows, exact_estimates
from tpsr.envs.pomdp import forward_probability, history_state, random_pomdp, sample_trajectories
from tpsr.envs.trajectories import Trajectory
from tpsr.errors import ValidationError
from tpsr.features.kernels import IndicatorSet, KernelSet
from tpsr.learning.estimates import SampleBatch, accumulate_estimates
from tpsr.learning.pipeline import (
    build_samples,
    embed_histories,
    fit_feature_map,
    indicator_feature_map,
    learn_model,
    samples_from_windows,
)
from tpsr.learning.spectral import LearnConfig, learn_from_estimates
from tpsr.model.tpsr import sequence_probability


def window_len_for(p):
    """Smallest window length whose sequences outnumber twice the states."""

    pairs = p.num_actions * p.num_obs
    k = 1
    while pairs**k < 2 * p.num_states:
        k += 1

    return k


def numerical_rank(spectrum, tol=1e-8):
    """Count singular values above a fraction of the largest."""
    return int(np.sum(spectrum > tol * spectrum[0]))


def stable_rank(p, window_len=2):
    """Rank of the exact moments, ignoring directions too weak to estimate."""

    est = exact_estimates(p, window_len, window_len)

    return numerical_rank(np.linalg.svd(est.p_th, compute_uv=False), tol=1e-3)


def assert_matches_pomdp(model, p, past_len, max_len=4, atol=1e-8):
    """Compare every short sequence probability with the forward algorithm."""

    belief = history_state(p, past_len)
    for length in range(1, max_len + 1):
        for steps in itertools.product(range(p.num_actions), range(p.num_obs), repeat=length):
            actions, observations = steps[0::2], steps[1::2]
            weights = np.eye(p.num_obs)[list(observations)]
            learned = sequence_probability(model, actions, weights)
            expected = forward_probability(p, actions, observations, belief)
            assert learned == pytest.approx(expected, abs=atol)


def test_indicator_feature_map_dims():
    """Test the dimensions of the one-hot feature map."""

    feature_map = indicator_feature_map(num_obs=3, num_actions=2, past_len=2, future_len=1)

    assert feature_map.indicative.dim == 36
    assert feature_map.characteristic.dim == 6
    assert feature_map.observation.dim == 3
    assert (feature_map.past_len, feature_map.future_len) == (2, 1)


def test_enumerated_windows_give_exact_estimates(three_state):
    """Test that probability-weighted windows accumulate to the analytic moments."""

    past_len, future_len = 2, 2
    actions, observations, probabilities = enumerate_windows(three_state, past_len, future_len)
    feature_map = indicator_feature_map(2, 2, past_len, future_len)

    batch = samples_from_windows(actions, observations, feature_map, probabilities)
    projection = np.eye(feature_map.characteristic.dim)
    enumerated = accumulate_estimates([batch], 2, projection)
    exact = exact_estimates(three_state, past_len, future_len)

    assert np.isclose(probabilities.sum(), 1.0)
    assert np.allclose(enumerated.p_h, exact.p_h, atol=1e-14)
    assert np.allclose(enumerated.p_th, exact.p_th, atol=1e-14)
    assert np.allclose(enumerated.action_weights, exact.action_weights)
    assert np.allclose(enumerated.proj_p_taoh, exact.proj_p_taoh, atol=1e-14)


def test_exact_recovery_three_state(three_state):
    """Test that exact moments of the three-state system give exact predictions."""

    est = exact_estimates(three_state, 2, 2)
    spectrum = np.linalg.svd(est.p_th, compute_uv=False)
    model, _ = learn_from_estimates(est, LearnConfig(rank_n=numerical_rank(spectrum)))

    assert numerical_rank(spectrum) <= 3
    assert_matches_pomdp(model, three_state, past_len=2)


@pytest.mark.parametrize("seed", range(20))
def test_exact_recovery_random_pomdps(seed):
    """Test exact recovery on random systems from their analytic moments."""

    rng = np.random.default_rng(seed)
    p = random_pomdp(rng, *rng.integers((1, 1, 2), (5, 3, 4), endpoint=True))
    k = window_len_for(p)

    est = exact_estimates(p, k, k)
    spectrum = np.linalg.svd(est.p_th, compute_uv=False)
    model, _ = learn_from_estimates(est, LearnConfig(rank_n=numerical_rank(spectrum)))

    assert numerical_rank(spectrum) <= p.num_states
    assert_matches_pomdp(model, p, past_len=k)


def test_samples_from_windows_rejects_layout(three_state):
    """Test that windows of the wrong length do not fit the feature map."""

    actions, observations, _ = enumerate_windows(three_state, 1, 1)

    with pytest.raises(ValidationError):
        samples_from_windows(actions, observations, indicator_feature_map(2, 2, 2, 1))


def test_build_samples_batches(three_state):
    """Test that batching does not change the accumulated moments."""

    trajectories = sample_trajectories(three_state, 20, 6, seed=1)
    feature_map = indicator_feature_map(2, 2, 1, 1)

    small = list(build_samples(trajectories, feature_map, batch_size=7))
    large = list(build_samples(trajectories, feature_map))

    assert [len(b) for b in small] == [7] * 11 + [3]
    assert np.allclose(
        accumulate_estimates(small, 2).p_th, accumulate_estimates(large, 2).p_th
    )


def test_learn_model_from_samples(three_state):
    """Test that learning from sampled data approximates the system."""

    rank_n = stable_rank(three_state)
    trajectories = sample_trajectories(three_state, 20000, 5, seed=3)
    feature_map = indicator_feature_map(2, 2, 2, 2)

    result = learn_model(trajectories, feature_map, LearnConfig(rank_n=rank_n), num_actions=2)

    assert result.model.feature_map_ref == feature_map.ref
    assert result.estimates.total_weight == 20000
    assert np.all(np.diff(result.spectrum) <= 0)
    assert_matches_pomdp(result.model, three_state, past_len=2, max_len=1, atol=0.05)


@pytest.mark.slow
def test_learning_is_consistent(three_state):
    """Test that the mean prediction error falls as the training set grows."""

    feature_map = indicator_feature_map(2, 2, 2, 2)
    belief = history_state(three_state, 2)
    cfg = LearnConfig(rank_n=stable_rank(three_state))
    sequences = [
        (steps[0::2], steps[1::2])
        for steps in itertools.product(range(2), repeat=6)
    ]
    expected = np.array(
        [forward_probability(three_state, a, o, belief) for a, o in sequences]
    )

    def error(count, seed):
        trajectories = sample_trajectories(three_state, count, 5, seed=seed)
        model = learn_model(trajectories, feature_map, cfg, 2).model
        learned = np.array(
            [sequence_probability(model, a, np.eye(2)[list(o)]) for a, o in sequences]
        )
        return np.abs(learned - expected).mean()

    counts = (1_000, 10_000, 100_000)
    errors = [np.mean([error(count, seed) for seed in range(5)]) for count in counts]

    assert errors[0] > errors[1] > errors[2]
    assert errors[2] < 0.01


def test_fit_feature_map_on_continuous_windows(rng):
    """Test kernel feature maps on continuous observations."""

    trajectories = [
        Trajectory(rng.integers(2, size=6), rng.standard_normal((6, 2))) for _ in range(30)
    ]
    feature_map = fit_feature_map(trajectories, 2, 1, (10, 8, 5), seed=0)

    assert isinstance(feature_map.indicative, KernelSet)
    assert (feature_map.indicative.dim, feature_map.characteristic.dim) == (10, 8)
    assert feature_map.observation.dim == 5
    assert feature_map.ref == fit_feature_map(trajectories, 2, 1, (10, 8, 5), seed=0).ref


def test_fit_feature_map_without_past(rng):
    """Test that an empty past window gets a single constant feature."""

    trajectories = [Trajectory([0, 1, 0], rng.standard_normal((3, 2))) for _ in range(10)]
    feature_map = fit_feature_map(trajectories, 0, 1, (4, 4, 4), seed=0)

    assert isinstance(feature_map.indicative, IndicatorSet)
    assert feature_map.indicative.dim == 1


def test_embed_histories_are_normalized(three_state):
    """Test that embedded histories lie on the normalized hyperplane."""

    est = exact_estimates(three_state, 2, 2)
    spectrum = np.linalg.svd(est.p_th, compute_uv=False)
    model, _ = learn_from_estimates(est, LearnConfig(rank_n=numerical_rank(spectrum)))
    trajectories = sample_trajectories(three_state, 5, 5, seed=0)

    batch = next(build_samples(trajectories, indicator_feature_map(2, 2, 2, 2)))
    states, valid = embed_histories(model, batch)

    assert states.shape == (5, model.rank_n)
    assert np.all(valid)
    assert np.allclose(states @ model.b_inf, 1.0)


def test_embed_histories_flags_vanishing_normalizer(three_state):
    """Test that histories without test mass are flagged, not divided."""

    est = exact_estimates(three_state, 1, 1)
    model, _ = learn_from_estimates(est, LearnConfig(rank_n=2))
    batch = SampleBatch(
        indicative_features=np.ones((2, 4)) / 4,
        characteristic_features=np.vstack([np.zeros(4), np.eye(4)[0]]),
        next_characteristic_features=np.ones((2, 4)) / 4,
        middle_actions=[0, 1],
        middle_obs_weights=np.ones((2, 2)) / 2,
    )

    states, valid = embed_histories(model, batch)

    assert valid.tolist() == [False, True]
    assert np.array_equal(states[0], np.zeros(2))
