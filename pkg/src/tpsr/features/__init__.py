"""Feature maps over observation windows and observable operators."""

from .kernels import (
    FeatureMap,
    IndicatorSet,
    KernelSet,
    eval_features,
    fit_kernel_set,
    sequence_index,
)
from .operators import compose_operator, compose_operators
from .whitening import WhiteningTransform, fit_whitening

__all__ = [
    "FeatureMap",
    "IndicatorSet",
    "KernelSet",
    "WhiteningTransform",
    "compose_operator",
    "compose_operators",
    "eval_features",
    "fit_kernel_set",
    "fit_whitening",
    "sequence_index",
]
