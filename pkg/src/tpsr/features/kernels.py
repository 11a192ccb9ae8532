"""Kernel and indicator feature maps over observation windows.

Three encoders turn raw data into normalized weight vectors: indicative
features of the past window, characteristic features of a future
window, and observation kernels for the single observation at the
pivot step. Continuous data use Gaussian kernels in a whitened space
(`KernelSet`); discrete data use one-hot indicators of the window
outcome (`IndicatorSet`). Both return vectors that sum to one.
"""

import base64
import hashlib
import json
import logging
from dataclasses import dataclass
from typing import Protocol

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import softmax

from tpsr.errors import FormatError
from tpsr.features.whitening import WhiteningTransform, fit_whitening

#: Rows evaluated per call to `cdist`.
CHUNK_SIZE = 4096

#: Center pairs sampled by the median bandwidth heuristic.
BANDWIDTH_PAIRS = 200


class Encoder(Protocol):
    """A map from observation windows to normalized weight vectors."""

    window_len: int

    @property
    def dim(self) -> int:
        """Length of the weight vectors."""

    def evaluate(self, observations: np.ndarray, actions: np.ndarray | None = None) -> np.ndarray:
        """Evaluate windows of shape `(..., window_len, obs_dim)`."""

    def to_dict(self) -> dict:
        """Serialize to a JSON-compatible dictionary."""


def encode_array(array: np.ndarray) -> dict:
    """Pack an array as little-endian 64-bit floats in base64."""

    array = np.ascontiguousarray(array, dtype="<f8")

    return {"shape": list(array.shape), "data": base64.b64encode(array.tobytes()).decode()}


def decode_array(payload: dict) -> np.ndarray:
    """Unpack an array written by `encode_array`."""

    data = np.frombuffer(base64.b64decode(payload["data"]), dtype="<f8")

    return data.reshape(payload["shape"]).astype(np.float64)


def _batched(observations: np.ndarray, window_len: int) -> tuple[np.ndarray, bool]:
    """Reshape windows to `(N, window_len, obs_dim)` and flag single inputs."""

    observations = np.asarray(observations, dtype=np.float64)
    single = observations.ndim == 2
    if single:
        observations = observations[None]
    assert observations.ndim == 3, "Windows must have shape (..., window_len, obs_dim)"
    assert observations.shape[1] == window_len, (
        f"Expected windows of length {window_len}, got {observations.shape[1]}"
    )

    return observations, single


@dataclass(frozen=True)
class KernelSet:
    """Gaussian kernels centred on whitened training windows.

    Parameters
    ----------
    centers : numpy.ndarray
        Whitened kernel centers, shape `(m, k)`.
    bandwidth : float
        Shared spherical kernel width in whitened space.
    whitening : WhiteningTransform
        Transform from flattened raw windows to whitened space.
    window_len : int
        Number of observations per window.
    """

    centers: np.ndarray
    bandwidth: float
    whitening: WhiteningTransform
    window_len: int

    def __post_init__(self) -> None:
        assert len(self.centers) >= 1, "A kernel set needs at least one center"
        assert self.bandwidth > 0, "Kernel bandwidth must be positive"

    @property
    def dim(self) -> int:
        """Number of kernels."""
        return len(self.centers)

    def evaluate(self, observations: np.ndarray, actions: np.ndarray | None = None) -> np.ndarray:
        """Evaluate normalized kernel weights for observation windows.

        Actions in the window are not part of the feature.

        Parameters
        ----------
        observations : numpy.ndarray
            One window `(window_len, obs_dim)` or a batch of them
            `(N, window_len, obs_dim)`.
        actions : numpy.ndarray, optional
            Ignored.

        Returns
        -------
        numpy.ndarray
            Weights `w_j ~ exp(-|x - c_j|^2 / (2 h^2))` summing to one,
            shape `(m,)` or `(N, m)`. Rows whose unnormalized weights
            all underflow to zero, or that hold non-finite input, are
            one-hot at the nearest center.
        """

        windows, single = _batched(observations, self.window_len)
        flat = windows.reshape(len(windows), -1)

        weights = np.empty((len(flat), self.dim))
        for start in range(0, len(flat), CHUNK_SIZE):
            whitened = self.whitening.apply(flat[start : start + CHUNK_SIZE])
            sq_dists = cdist(whitened, self.centers, "sqeuclidean")
            logits = -sq_dists / (2 * self.bandwidth**2)
            chunk = softmax(logits, axis=1)

            underflow = np.exp(logits.max(axis=1)) == 0
            bad = underflow | ~np.all(np.isfinite(chunk), axis=1)
            if np.any(bad):
                nearest = np.argmin(np.nan_to_num(sq_dists[bad], nan=np.inf), axis=1)
                chunk[bad] = np.eye(self.dim)[nearest]

            weights[start : start + CHUNK_SIZE] = chunk

        return weights[0] if single else weights

    def to_dict(self) -> dict:
        """Serialize the kernel set."""

        return {
            "kind": "kernel",
            "window_len": self.window_len,
            "center_count": self.dim,
            "bandwidth": self.bandwidth,
            "centers": encode_array(self.centers),
            "mean": encode_array(self.whitening.mean),
            "basis": encode_array(self.whitening.basis),
            "scales": encode_array(self.whitening.scales),
        }


def sequence_index(
    observations: np.ndarray, actions: np.ndarray | None, num_obs: int, num_actions: int
) -> np.ndarray:
    """Index discrete windows in mixed radix, first step most significant.

    Each step contributes the digit `a * num_obs + o` when actions are
    given and `o` otherwise.

    Parameters
    ----------
    observations : numpy.ndarray
        Integer observation symbols, shape `(N, L)`.
    actions : numpy.ndarray, optional
        Integer actions, shape `(N, L)`.
    num_obs : int
        Number of observation symbols.
    num_actions : int
        Number of actions.

    Returns
    -------
    numpy.ndarray
        Integer indices, shape `(N,)`.
    """

    digits = np.asarray(observations, dtype=np.int64)
    base = num_obs
    if actions is not None:
        digits = np.asarray(actions, dtype=np.int64) * num_obs + digits
        base = num_actions * num_obs

    index = np.zeros(len(digits), dtype=np.int64)
    for step in range(digits.shape[1]):
        index = index * base + digits[:, step]

    return index


@dataclass(frozen=True)
class IndicatorSet:
    """One-hot indicators of discrete window outcomes.

    Parameters
    ----------
    num_obs : int
        Number of observation symbols.
    num_actions : int
        Number of actions.
    window_len : int
        Number of steps per window.
    include_actions : bool
        Whether the actions of the window are part of the outcome.
    """

    num_obs: int
    num_actions: int
    window_len: int
    include_actions: bool = True

    @property
    def dim(self) -> int:
        """Number of distinct window outcomes."""
        base = self.num_obs * (self.num_actions if self.include_actions else 1)
        return base**self.window_len

    def evaluate(self, observations: np.ndarray, actions: np.ndarray | None = None) -> np.ndarray:
        """Return the one-hot vector of each window's outcome.

        Parameters
        ----------
        observations : numpy.ndarray
            Windows of symbols, shape `(window_len, 1)` or
            `(N, window_len, 1)`.
        actions : numpy.ndarray, optional
            Actions of the windows, shape `(window_len,)` or
            `(N, window_len)`. Required when `include_actions` is set.

        Returns
        -------
        numpy.ndarray
            One-hot rows, shape `(dim,)` or `(N, dim)`.
        """

        windows, single = _batched(observations, self.window_len)
        symbols = np.rint(windows[..., 0]).astype(np.int64)
        assert np.all((symbols >= 0) & (symbols < self.num_obs)), "Observation out of range"

        if self.include_actions:
            assert actions is not None, "This indicator set needs the window actions"
            actions = np.asarray(actions, dtype=np.int64).reshape(symbols.shape)
        else:
            actions = None

        index = sequence_index(symbols, actions, self.num_obs, self.num_actions)
        onehot = np.zeros((len(index), self.dim))
        onehot[np.arange(len(index)), index] = 1.0

        return onehot[0] if single else onehot

    def to_dict(self) -> dict:
        """Serialize the indicator set."""

        return {
            "kind": "indicator",
            "num_obs": self.num_obs,
            "num_actions": self.num_actions,
            "window_len": self.window_len,
            "include_actions": self.include_actions,
        }


def encoder_from_dict(payload: dict) -> KernelSet | IndicatorSet:
    """Rebuild an encoder written by its `to_dict` method."""

    kind = payload.get("kind")
    if kind == "indicator":
        return IndicatorSet(
            num_obs=payload["num_obs"],
            num_actions=payload["num_actions"],
            window_len=payload["window_len"],
            include_actions=payload["include_actions"],
        )
    if kind == "kernel":
        whitening = WhiteningTransform(
            mean=decode_array(payload["mean"]),
            basis=decode_array(payload["basis"]),
            scales=decode_array(payload["scales"]),
        )
        centers = decode_array(payload["centers"])
        if len(centers) != payload["center_count"]:
            raise FormatError("Kernel center count does not match its payload")
        return KernelSet(
            centers=centers,
            bandwidth=float(payload["bandwidth"]),
            whitening=whitening,
            window_len=payload["window_len"],
        )

    raise FormatError(f"Unknown encoder kind: {kind!r}")


def median_bandwidth(centers: np.ndarray, rng: np.random.Generator) -> float:
    """Choose a kernel width by the median heuristic.

    The width is the median distance between `200` random pairs of
    distinct centers, divided by the square root of their dimension.
    """

    m, dim = centers.shape
    if m < 2:
        return 1.0

    first = rng.integers(0, m, size=BANDWIDTH_PAIRS)
    second = (first + rng.integers(1, m, size=BANDWIDTH_PAIRS)) % m
    distances = np.linalg.norm(centers[first] - centers[second], axis=1)
    bandwidth = float(np.median(distances)) / np.sqrt(dim)

    return bandwidth if bandwidth > 0 else 1.0


def fit_kernel_set(
    windows: np.ndarray,
    num_centers: int,
    rng: np.random.Generator,
    bandwidth: float | None = None,
    components: int | None = None,
) -> KernelSet:
    """Fit whitening and draw kernel centers from training windows.

    Parameters
    ----------
    windows : numpy.ndarray
        Raw windows, shape `(N, window_len, obs_dim)`.
    num_centers : int
        Number of centers, drawn uniformly without replacement. Capped
        at `N`.
    rng : numpy.random.Generator
        Source of randomness for the center draw and bandwidth pairs.
    bandwidth : float, optional
        Kernel width. By default chosen by `median_bandwidth`.
    components : int, optional
        Number of principal directions kept by the whitening.

    Returns
    -------
    KernelSet
        The fitted kernel set.
    """

    windows = np.asarray(windows, dtype=np.float64)
    assert windows.ndim == 3, "Windows must have shape (N, window_len, obs_dim)"

    flat = windows.reshape(len(windows), -1)
    whitening = fit_whitening(flat, components=components)

    count = min(num_centers, len(flat))
    if count < num_centers:
        logging.warning(f"Only {count} windows available for {num_centers} kernel centers")
    chosen = rng.choice(len(flat), size=count, replace=False)
    centers = whitening.apply(flat[chosen])

    if bandwidth is None:
        bandwidth = median_bandwidth(centers, rng)

    return KernelSet(
        centers=centers, bandwidth=bandwidth, whitening=whitening, window_len=windows.shape[1]
    )


@dataclass(frozen=True)
class FeatureMap:
    """The indicative, characteristic and observation encoders of a model.

    Parameters
    ----------
    indicative : KernelSet or IndicatorSet
        Features of the past window.
    characteristic : KernelSet or IndicatorSet
        Features of a test window.
    observation : KernelSet or IndicatorSet
        Kernels of the single observation at the pivot step.
    """

    indicative: KernelSet | IndicatorSet
    characteristic: KernelSet | IndicatorSet
    observation: KernelSet | IndicatorSet

    def __post_init__(self) -> None:
        assert self.observation.window_len == 1, "Observation kernels cover one observation"
        assert self.characteristic.window_len >= 1

    @property
    def past_len(self) -> int:
        """Length of the history window."""
        return self.indicative.window_len

    @property
    def future_len(self) -> int:
        """Length of a test window."""
        return self.characteristic.window_len

    def to_dict(self) -> dict:
        """Serialize all three encoders."""

        return {
            "indicative": self.indicative.to_dict(),
            "characteristic": self.characteristic.to_dict(),
            "observation": self.observation.to_dict(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "FeatureMap":
        """Rebuild a feature map written by `to_dict`."""

        return cls(
            indicative=encoder_from_dict(payload["indicative"]),
            characteristic=encoder_from_dict(payload["characteristic"]),
            observation=encoder_from_dict(payload["observation"]),
        )

    @property
    def ref(self) -> str:
        """Hexadecimal digest identifying the feature map."""

        payload = json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")

        return hashlib.md5(payload).hexdigest()

    def observation_support(self) -> np.ndarray:
        """One-hot weight vectors of every observation kernel."""
        return np.eye(self.observation.dim)


def eval_features(
    encoder: KernelSet | IndicatorSet, window: np.ndarray, actions=None
) -> np.ndarray:
    """Evaluate the normalized features of one window or a batch of windows."""
    return encoder.evaluate(window, actions)
