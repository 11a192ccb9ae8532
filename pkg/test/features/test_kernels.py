"""Unit tests for the `kernels` module."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import trapezoid
from scipy.stats import norm

from strategies import st_seeds
from tpsr.errors import FormatError
from tpsr.features.kernels import (
    FeatureMap,
    IndicatorSet,
    KernelSet,
    decode_array,
    encode_array,
    encoder_from_dict,
    eval_features,
    fit_kernel_set,
    median_bandwidth,
    sequence_index,
)
from tpsr.features.whitening import WhiteningTransform


@pytest.fixture
def kernel_set(rng):
    """Kernels fitted to random two-step windows of 3-dimensional observations."""
    return fit_kernel_set(rng.standard_normal((300, 2, 3)), 20, rng)


def test_encode_array_is_exact(rng):
    """Test that arrays survive the base64 packing bit for bit."""

    array = rng.standard_normal((4, 3))
    restored = decode_array(encode_array(array))

    assert restored.shape == (4, 3)
    assert restored.tobytes() == array.tobytes()


@given(st_seeds(), st.integers(1, 50))
@settings(deadline=None)
def test_kernel_weights_are_normalized(seed, count):
    """Test that kernel weights are nonnegative and sum to one."""

    rng = np.random.default_rng(seed)
    kernels = fit_kernel_set(rng.standard_normal((60, 1, 2)), count, rng)
    weights = kernels.evaluate(rng.standard_normal((25, 1, 2)) * 10)

    assert kernels.dim == min(count, 60)
    assert weights.shape == (25, kernels.dim)
    assert np.all(weights >= 0)
    assert np.allclose(weights.sum(axis=1), 1.0)


def test_kernel_single_window(kernel_set, rng):
    """Test that a single window gives a single weight vector."""

    window = rng.standard_normal((2, 3))
    weights = kernel_set.evaluate(window)

    assert weights.shape == (kernel_set.dim,)
    assert np.allclose(weights, kernel_set.evaluate(window[None])[0])
    assert np.allclose(weights, eval_features(kernel_set, window))


def test_kernel_weights_peak_at_center():
    """Test that a window at a center puts the most weight on it."""

    centers = np.array([[0.0, 0.0], [3.0, 0.0], [0.0, 3.0]])
    whitening = WhiteningTransform(mean=np.zeros(2), basis=np.eye(2), scales=np.ones(2))
    kernels = KernelSet(centers=centers, bandwidth=1.0, whitening=whitening, window_len=1)

    weights = kernels.evaluate(centers[:, None, :])

    assert np.array_equal(np.argmax(weights, axis=1), [0, 1, 2])
    assert np.isclose(weights[0, 1], np.exp(-4.5) / (1 + 2 * np.exp(-4.5)))


def test_kernel_non_finite_window_is_one_hot(kernel_set):
    """Test that a window with an infinite entry falls back to its nearest center."""

    window = np.zeros((1, 2, 3))
    window[0, 0, 0] = np.inf
    weights = kernel_set.evaluate(window)

    assert np.isclose(weights.sum(), 1.0)
    assert np.count_nonzero(weights) == 1


def test_kernel_underflow_is_one_hot():
    """Test that a window whose kernel values all underflow goes to its nearest center."""

    whitening = WhiteningTransform(mean=np.zeros(1), basis=np.eye(1), scales=np.ones(1))
    kernels = KernelSet(
        centers=np.array([[0.0], [2.0]]), bandwidth=1e-3, whitening=whitening, window_len=1
    )

    weights = kernels.evaluate(np.array([[[1.0 + 1e-9]], [[-1e6]], [[0.5e-3]]]))

    assert np.array_equal(weights[0], [0.0, 1.0])
    assert np.array_equal(weights[1], [1.0, 0.0])
    assert np.isclose(weights[2, 0], 1.0)
    assert np.allclose(weights.sum(axis=1), 1.0)


@given(st_seeds())
@settings(deadline=None, max_examples=20)
def test_kernel_density_error_shrinks_with_data(seed):
    """Test that mean kernel weights of a sample approach their expectation."""

    whitening = WhiteningTransform(mean=np.zeros(1), basis=np.eye(1), scales=np.ones(1))
    centers = np.linspace(-2, 2, 9)[:, None]
    kernels = KernelSet(centers=centers, bandwidth=0.5, whitening=whitening, window_len=1)

    grid = np.linspace(-8, 8, 4001)
    expected = trapezoid(
        kernels.evaluate(grid[:, None, None]) * norm.pdf(grid)[:, None], grid, axis=0
    )

    rng = np.random.default_rng(seed)
    errors = []
    for n in (100, 10_000, 1_000_000):
        estimate = eval_features(kernels, rng.standard_normal((n, 1, 1))).mean(axis=0)
        errors.append(np.abs(estimate - expected).sum())

    assert errors[0] > errors[1] > errors[2]
    assert errors[2] < 0.01


def test_kernel_set_round_trip(kernel_set, rng):
    """Test that a kernel set rebuilt from its dictionary evaluates identically."""

    restored = encoder_from_dict(kernel_set.to_dict())
    windows = rng.standard_normal((10, 2, 3))

    assert np.array_equal(restored.evaluate(windows), kernel_set.evaluate(windows))


def test_encoder_from_dict_errors(kernel_set):
    """Test that unknown kinds and inconsistent counts are rejected."""

    with pytest.raises(FormatError):
        encoder_from_dict({"kind": "wavelet"})

    payload = kernel_set.to_dict()
    payload["center_count"] += 1
    with pytest.raises(FormatError):
        encoder_from_dict(payload)


def test_median_bandwidth(rng):
    """Test the median heuristic on a grid and its fallbacks."""

    centers = rng.standard_normal((100, 4))

    assert median_bandwidth(centers, rng) > 0
    assert median_bandwidth(centers[:1], rng) == 1.0
    assert median_bandwidth(np.zeros((5, 4)), rng) == 1.0


def test_fit_kernel_set_caps_centers(rng, caplog):
    """Test that asking for more centers than windows keeps every window."""

    kernels = fit_kernel_set(rng.standard_normal((8, 1, 2)), 20, rng, bandwidth=0.5)

    assert kernels.dim == 8
    assert kernels.bandwidth == 0.5
    assert "Only 8 windows" in caplog.text


def test_sequence_index():
    """Test mixed-radix indexing with and without actions."""

    observations = np.array([[1, 0], [0, 1]])
    actions = np.array([[1, 0], [0, 1]])

    assert sequence_index(observations, None, 2, 2).tolist() == [2, 1]
    assert sequence_index(observations, actions, 2, 2).tolist() == [3 * 4 + 0, 0 * 4 + 3]


@given(st.integers(1, 3), st.integers(2, 4), st.integers(1, 3), st.data())
def test_indicator_is_one_hot(num_actions, num_obs, window_len, data):
    """Test that each window lights up exactly the entry of its outcome."""

    indicators = IndicatorSet(num_obs, num_actions, window_len)
    symbols = data.draw(
        st.lists(st.integers(0, num_obs - 1), min_size=window_len, max_size=window_len)
    )
    actions = data.draw(
        st.lists(st.integers(0, num_actions - 1), min_size=window_len, max_size=window_len)
    )

    onehot = indicators.evaluate(np.array(symbols, dtype=float)[:, None], np.array(actions))
    expected = sequence_index(np.array([symbols]), np.array([actions]), num_obs, num_actions)

    assert indicators.dim == (num_actions * num_obs) ** window_len
    assert onehot.sum() == 1.0
    assert onehot[expected[0]] == 1.0


def test_indicator_without_actions():
    """Test that observation indicators ignore the actions."""

    indicators = IndicatorSet(3, 2, 1, include_actions=False)
    onehot = indicators.evaluate(np.array([[[2.0]], [[0.0]]]))

    assert indicators.dim == 3
    assert onehot.tolist() == [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]


def test_empty_indicator_window():
    """Test that a window of no steps has a single constant feature."""

    indicators = IndicatorSet(1, 1, 0, include_actions=False)

    assert indicators.dim == 1
    assert indicators.evaluate(np.zeros((4, 0, 3))).tolist() == [[1.0]] * 4


def test_feature_map_round_trip(kernel_set, rng):
    """Test that a feature map keeps its checksum through serialization."""

    observation = fit_kernel_set(rng.standard_normal((50, 1, 3)), 5, rng)
    feature_map = FeatureMap(
        indicative=kernel_set, characteristic=kernel_set, observation=observation
    )
    restored = FeatureMap.from_dict(feature_map.to_dict())

    assert restored.ref == feature_map.ref
    assert len(feature_map.ref) == 32
    assert restored.past_len == restored.future_len == 2
    assert np.array_equal(feature_map.observation_support(), np.eye(5))


def test_feature_map_ref_tracks_contents():
    """Test that different feature maps have different checksums."""

    first = FeatureMap(IndicatorSet(2, 2, 1), IndicatorSet(2, 2, 1), IndicatorSet(2, 2, 1, False))
    second = FeatureMap(IndicatorSet(3, 2, 1), IndicatorSet(3, 2, 1), IndicatorSet(3, 2, 1, False))

    assert first.ref != second.ref
