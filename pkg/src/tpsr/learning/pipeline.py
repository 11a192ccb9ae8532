"""The two-pass learning pipeline from trajectories to a model."""

import logging
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from tpsr.envs.trajectories import Trajectory
from tpsr.errors import ValidationError
from tpsr.features.kernels import FeatureMap, IndicatorSet, fit_kernel_set
from tpsr.learning.estimates import EmpiricalEstimates, SampleBatch, accumulate_estimates
from tpsr.learning.spectral import LearnConfig, estimate_parameters, truncated_svd
from tpsr.learning.windows import window_arrays
from tpsr.model.tpsr import DEGENERATE_TOL, TpsrModel

#: Windows turned into features at a time.
BATCH_SIZE = 4096


@dataclass(frozen=True)
class LearnResult:
    """
    Everything produced by a learning run.

    Parameters
    ----------
    model : TpsrModel
        The learned model.
    spectrum : numpy.ndarray
        Singular values of the estimated `P_TH`, descending.
    estimates : EmpiricalEstimates
        Second-pass estimates.
    """

    model: TpsrModel
    spectrum: np.ndarray
    estimates: EmpiricalEstimates


def indicator_feature_map(
    num_obs: int, num_actions: int, past_len: int, future_len: int
) -> FeatureMap:
    """Build the one-hot feature map of a discrete system."""

    return FeatureMap(
        indicative=IndicatorSet(num_obs, num_actions, past_len, include_actions=True),
        characteristic=IndicatorSet(num_obs, num_actions, future_len, include_actions=True),
        observation=IndicatorSet(num_obs, num_actions, 1, include_actions=False),
    )


def fit_feature_map(
    trajectories: Sequence[Trajectory],
    past_len: int,
    future_len: int,
    kernel_counts: tuple[int, int, int],
    seed: int,
    bandwidth: float | None = None,
    components: int | None = None,
    stride: int = 1,
    burn_in: int = 0,
) -> FeatureMap:
    """
    Fit Gaussian kernel features to the center-generation trajectories.

    Parameters
    ----------
    trajectories : Sequence[Trajectory]
        Trajectories reserved for drawing kernel centers.
    past_len, future_len : int
        Window layout.
    kernel_counts : tuple[int, int, int]
        Number of indicative, characteristic and observation kernels.
    seed : int
        Root seed; each encoder draws from its own child stream.
    bandwidth : float, optional
        Kernel width override for every encoder.
    components : int, optional
        Principal directions kept by each whitening.
    stride, burn_in : int
        Window slicing, as in `window_arrays`.

    Returns
    -------
    feature_map : FeatureMap
        The fitted feature map.
    """

    _, observations, _ = window_arrays(trajectories, past_len, future_len, stride, burn_in)
    pivot = past_len
    segments = (
        observations[:, :pivot],
        observations[:, pivot : pivot + future_len],
        observations[:, pivot : pivot + 1],
    )

    encoders = []
    for counter, (windows, count) in enumerate(zip(segments, kernel_counts)):
        if windows.shape[1] == 0:
            # Without a past every history shares one constant feature
            encoders.append(IndicatorSet(1, 1, 0, include_actions=False))
            continue
        rng = np.random.default_rng((seed, counter))
        encoders.append(fit_kernel_set(windows, count, rng, bandwidth, components))
        logging.info(
            f"Fitted {encoders[-1].dim} kernels on {windows.shape[1]}-step windows "
            f"(bandwidth {encoders[-1].bandwidth:.4g})"
        )

    return FeatureMap(*encoders)


def samples_from_windows(
    actions: np.ndarray,
    observations: np.ndarray,
    feature_map: FeatureMap,
    weights: np.ndarray | None = None,
) -> SampleBatch:
    """
    Evaluate the features of stacked windows.

    The indicative features cover the `past_len` pairs before the
    pivot. The characteristic features cover the test of `future_len`
    pairs starting at the pivot, and the next characteristic features
    the test starting right after it.

    Parameters
    ----------
    actions : numpy.ndarray
        Window actions, shape `(N, past_len + 1 + future_len)`.
    observations : numpy.ndarray
        Window observations, shape `(N, past_len + 1 + future_len, d)`.
    feature_map : FeatureMap
        Encoders to evaluate.
    weights : numpy.ndarray, optional
        Sample weights. Default is one per window.

    Returns
    -------
    batch : SampleBatch
        One sample per window.
    """

    past, future = feature_map.past_len, feature_map.future_len
    if actions.shape[1] != past + 1 + future:
        raise ValidationError(
            f"Windows of {actions.shape[1]} pairs do not fit a {past}/1/{future} feature map"
        )

    def segment(start: int, stop: int) -> tuple[np.ndarray, np.ndarray]:
        return observations[:, start:stop], actions[:, start:stop]

    characteristic = feature_map.characteristic

    return SampleBatch(
        indicative_features=feature_map.indicative.evaluate(*segment(0, past)),
        characteristic_features=characteristic.evaluate(*segment(past, past + future)),
        next_characteristic_features=characteristic.evaluate(
            *segment(past + 1, past + 1 + future)
        ),
        middle_actions=actions[:, past],
        middle_obs_weights=feature_map.observation.evaluate(*segment(past, past + 1)),
        weights=weights,
    )


def build_samples(
    trajectories: Sequence[Trajectory],
    feature_map: FeatureMap,
    stride: int = 1,
    burn_in: int = 0,
    batch_size: int = BATCH_SIZE,
) -> Iterator[SampleBatch]:
    """Slice trajectories and yield their samples in batches."""

    actions, observations, _ = window_arrays(
        trajectories, feature_map.past_len, feature_map.future_len, stride, burn_in
    )
    for start in range(0, len(actions), batch_size):
        chunk = slice(start, start + batch_size)
        yield samples_from_windows(actions[chunk], observations[chunk], feature_map)


def learn_model(
    trajectories: Sequence[Trajectory],
    feature_map: FeatureMap,
    cfg: LearnConfig,
    num_actions: int,
    actions: tuple[str, ...] = (),
) -> LearnResult:
    """
    Learn a TPSR from trajectories in two passes.

    The first pass estimates `P_H` and `P_TH`, whose truncated SVD fixes
    the projection `U`. The second pass accumulates the projected
    operator moments, from which the parameters are recovered.

    Parameters
    ----------
    trajectories : Sequence[Trajectory]
        Estimation trajectories.
    feature_map : FeatureMap
        Fitted feature map.
    cfg : LearnConfig
        Learner settings.
    num_actions : int
        Size of the action set.
    actions : tuple[str, ...], optional
        Action labels.

    Returns
    -------
    result : LearnResult
        The model, spectrum and estimates.
    """

    def samples() -> Iterator[SampleBatch]:
        return build_samples(trajectories, feature_map, cfg.stride, cfg.burn_in)

    first = accumulate_estimates(samples(), num_actions)
    logging.info(f"First pass done over total weight {first.total_weight:.0f}")

    projection, spectrum = truncated_svd(first.p_th, cfg.rank_n)
    if cfg.svd_tail_report:
        head = ", ".join(f"{s:.4g}" for s in spectrum[: cfg.rank_n + 3])
        logging.info(f"Leading singular values: {head}")

    second = accumulate_estimates(samples(), num_actions, projection=projection)
    model = estimate_parameters(second, projection, cfg, actions, feature_map.ref)

    return LearnResult(model=model, spectrum=spectrum, estimates=second)


def embed_histories(model: TpsrModel, batch: SampleBatch) -> tuple[np.ndarray, np.ndarray]:
    """
    Map each sample's pivot test features to a normalized state.

    The state of a history is `U^T phi_T / (b_inf . U^T phi_T)`, with
    `phi_T` the features of the test starting at the pivot.

    Returns
    -------
    states : numpy.ndarray
        Normalized states, shape `(N, n)`. Rows with a vanishing
        normalizer are left unnormalized.
    valid : numpy.ndarray
        Mask of rows whose normalizer was usable.
    """

    projected = batch.characteristic_features @ model.projection_u
    normalizers = projected @ model.b_inf
    valid = np.abs(normalizers) >= DEGENERATE_TOL

    states = projected.copy()
    states[valid] /= normalizers[valid, None]
    if not np.all(valid):
        logging.warning(f"{np.sum(~valid)} histories have a vanishing normalizer")

    return states, valid
