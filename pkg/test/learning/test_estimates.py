"""Unit tests for the `estimates` module."""

from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from strategies import st_seeds
from tpsr.errors import EmptyOutput, MissingAction, ValidationError
from tpsr.learning.estimates import SampleBatch, accumulate_estimates, merge_estimates


def random_batch(rng, size, num_actions=2, d_h=4, d_t=5, num_kernels=3, weights=None):
    """A batch of random normalized features."""

    return SampleBatch(
        indicative_features=rng.dirichlet(np.ones(d_h), size=size),
        characteristic_features=rng.dirichlet(np.ones(d_t), size=size),
        next_characteristic_features=rng.dirichlet(np.ones(d_t), size=size),
        middle_actions=np.arange(size) % num_actions,
        middle_obs_weights=rng.dirichlet(np.ones(num_kernels), size=size),
        weights=weights,
    )


def assert_estimates_close(first, second):
    """Check two estimates for equal sums and weights."""

    assert np.allclose(first.sum_h, second.sum_h)
    assert np.allclose(first.sum_th, second.sum_th)
    assert np.allclose(first.action_weights, second.action_weights)
    assert np.isclose(first.total_weight, second.total_weight)
    if first.sum_taoh is not None:
        assert np.allclose(first.sum_taoh, second.sum_taoh)


def test_batch_defaults_and_round_trip(rng):
    """Test default weights and splitting a batch into samples and back."""

    batch = random_batch(rng, 6)
    rebuilt = SampleBatch.from_samples(batch.samples())

    assert np.array_equal(batch.weights, np.ones(6))
    assert len(rebuilt) == 6
    assert np.array_equal(rebuilt.characteristic_features, batch.characteristic_features)
    assert np.array_equal(rebuilt.middle_actions, batch.middle_actions)


def test_from_samples_empty():
    """Test that an empty sample list cannot be stacked."""

    with pytest.raises(EmptyOutput):
        SampleBatch.from_samples([])


def test_first_pass_moments(rng):
    """Test the first-pass moments against direct averages."""

    batch = random_batch(rng, 50)
    est = accumulate_estimates([batch], num_actions=2)

    assert est.sum_taoh is None
    assert est.total_samples == 50
    assert est.raw_counts.tolist() == [25, 25]
    assert np.allclose(est.p_h, batch.indicative_features.mean(axis=0))
    expected = batch.characteristic_features.T @ batch.indicative_features / 50
    assert np.allclose(est.p_th, expected)


def test_second_pass_moments(rng):
    """Test the projected operator moments against a direct sum."""

    batch = random_batch(rng, 40)
    projection = np.linalg.qr(rng.standard_normal((5, 2)))[0]
    est = accumulate_estimates([batch], num_actions=2, projection=projection)

    expected = np.zeros((2, 3, 2, 4))
    for sample in batch.samples():
        projected = projection.T @ sample.next_characteristic_features
        for j, weight in enumerate(sample.middle_obs_weights):
            expected[sample.middle_action, j] += weight * np.outer(
                projected, sample.indicative_features
            )

    assert np.allclose(est.sum_taoh, expected)
    assert np.allclose(est.proj_p_taoh, expected / 20)


def test_singles_and_batches_agree(rng):
    """Test that single samples and batches accumulate to the same sums."""

    batch = random_batch(rng, 30)
    projection = np.eye(5)

    from_batch = accumulate_estimates([batch], 2, projection)
    from_singles = accumulate_estimates(batch.samples(), 2, projection)

    assert_estimates_close(from_batch, from_singles)


@given(st_seeds(), st.integers(2, 39))
@settings(deadline=None)
def test_merge_is_addition(seed, split):
    """Test that merging estimates of two halves equals accumulating the whole."""

    rng = np.random.default_rng(seed)
    batch = random_batch(rng, 41)
    samples = list(batch.samples())
    projection = np.eye(5)

    whole = accumulate_estimates(samples, 2, projection)
    merged = merge_estimates(
        accumulate_estimates(samples[:split], 2, projection),
        accumulate_estimates(samples[split:], 2, projection),
    )

    assert_estimates_close(whole, merged)


def test_weight_two_counts_twice(rng):
    """Test that a sample of weight two counts like two copies."""

    sample = next(random_batch(rng, 1).samples())
    doubled = replace(sample, weight=2.0)
    other = replace(sample, middle_action=1)

    assert_estimates_close(
        accumulate_estimates([doubled, other], 2, np.eye(5)),
        accumulate_estimates([sample, sample, other], 2, np.eye(5)),
    )


def test_missing_action(rng):
    """Test that an action without samples is reported."""

    batch = random_batch(rng, 10, num_actions=2)

    with pytest.raises(MissingAction):
        accumulate_estimates([batch], num_actions=3)


def test_zero_weight(rng):
    """Test that samples of zero total weight are rejected."""

    batch = random_batch(rng, 4, weights=np.zeros(4))

    with pytest.raises(EmptyOutput):
        accumulate_estimates([batch], num_actions=2)


def test_project_matches_second_pass(rng):
    """Test that projecting raw sums equals a second pass with the projection."""

    batch = random_batch(rng, 30)
    projection = np.linalg.qr(rng.standard_normal((5, 3)))[0]

    raw = accumulate_estimates([batch], 2, np.eye(5))
    direct = accumulate_estimates([batch], 2, projection)

    assert_estimates_close(raw.project(projection), direct)

    with pytest.raises(ValidationError):
        direct.project(projection)


def test_merge_rejects_mismatch(rng):
    """Test that estimates of different shapes or projections do not merge."""

    first = accumulate_estimates([random_batch(rng, 10)], 2)
    other_dims = accumulate_estimates([random_batch(rng, 10, d_t=6)], 2)
    projected = accumulate_estimates([random_batch(rng, 10)], 2, np.eye(5))

    with pytest.raises(ValidationError):
        merge_estimates(first, other_dims)
    with pytest.raises(ValidationError):
        merge_estimates(first, projected)
