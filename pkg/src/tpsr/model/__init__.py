"""Transformed PSR models, filtering and model files."""

from .io import load_model, save_model
from .predict import probability_table, trajectory_likelihoods
from .tpsr import (
    BeliefState,
    TpsrModel,
    clamp_probability,
    filter_sequence,
    filter_update,
    predict_tests,
    sequence_probability,
    similarity_transform,
)

__all__ = [
    "BeliefState",
    "TpsrModel",
    "clamp_probability",
    "filter_sequence",
    "filter_update",
    "load_model",
    "predict_tests",
    "probability_table",
    "save_model",
    "sequence_probability",
    "similarity_transform",
    "trajectory_likelihoods",
]
