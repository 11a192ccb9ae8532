"""Spectral learning of TPSRs from trajectories."""

from .estimates import (
    EmpiricalEstimates,
    SampleBatch,
    TrainingSample,
    accumulate_estimates,
    merge_estimates,
)
from .pipeline import (
    LearnResult,
    build_samples,
    embed_histories,
    fit_feature_map,
    indicator_feature_map,
    learn_model,
    samples_from_windows,
)
from .spectral import LearnConfig, estimate_parameters, learn_from_estimates, truncated_svd
from .windows import RawWindow, slice_suffix_histories, window_arrays

__all__ = [
    "EmpiricalEstimates",
    "LearnConfig",
    "LearnResult",
    "RawWindow",
    "SampleBatch",
    "TrainingSample",
    "accumulate_estimates",
    "build_samples",
    "embed_histories",
    "estimate_parameters",
    "fit_feature_map",
    "indicator_feature_map",
    "learn_from_estimates",
    "learn_model",
    "merge_estimates",
    "samples_from_windows",
    "slice_suffix_histories",
    "truncated_svd",
    "window_arrays",
]
