"""Tables of sequence probabilities and per-trajectory likelihoods."""

import logging
from typing import TYPE_CHECKING, Iterable

import numpy as np
import pandas as pd

from tpsr.errors import DegenerateUpdate
from tpsr.features.operators import compose_operator
from tpsr.model.tpsr import (
    TpsrModel,
    clamp_probability,
    filter_update,
    sequence_probability,
)

if TYPE_CHECKING:
    from tpsr.envs.trajectories import Trajectory
    from tpsr.features.kernels import FeatureMap


def sequence_digits(index: np.ndarray, base: int, length: int) -> np.ndarray:
    """Split mixed-radix sequence indices into their digits, first step first."""

    digits = np.empty((len(index), length), dtype=np.int64)
    remainder = np.asarray(index, dtype=np.int64)
    for step in reversed(range(length)):
        digits[:, step] = remainder % base
        remainder = remainder // base

    return digits


def probability_table(model: TpsrModel, length: int) -> pd.DataFrame:
    """
    Tabulate the probability of every sequence of a given length.

    Observations are represented by one-hot weights on the observation
    kernels, so for a discrete model the table covers every
    action-observation sequence. Rows are ordered by sequence index with
    the pair `(a, j)` counted as `a * num_kernels + j` and the first step
    most significant.

    Parameters
    ----------
    model : TpsrModel
        Model to evaluate.
    length : int
        Number of action-observation pairs per sequence.

    Returns
    -------
    table : pandas.DataFrame
        One row per sequence with columns `action_1, obs_1, ...,
        action_t, obs_t` and `probability`.
    """

    assert length >= 0, "Sequence length must be nonnegative"

    n, pairs = model.rank_n, model.num_actions * model.num_kernels
    operators = model.operators.reshape(pairs, n, n)

    states = model.b1[None, :]
    for _ in range(length):
        states = np.einsum("pnm,km->kpn", operators, states).reshape(-1, n)

    digits = sequence_digits(np.arange(len(states)), pairs, length)
    columns = {}
    for step in range(length):
        columns[f"action_{step + 1}"] = digits[:, step] // model.num_kernels
        columns[f"obs_{step + 1}"] = digits[:, step] % model.num_kernels
    columns["probability"] = states @ model.b_inf

    return pd.DataFrame(columns)


def trajectory_likelihoods(
    model: TpsrModel, feature_map: "FeatureMap", trajectories: Iterable["Trajectory"]
) -> pd.DataFrame:
    """
    Score trajectories under a model.

    The raw probability is the product form `b_inf . B ... B b1`. The
    log-likelihood sums the logs of the clamped one-step predictions
    along the filtered states; if an update degenerates, filtering
    restarts from the initial state.

    Parameters
    ----------
    model : TpsrModel
        Model to score with.
    feature_map : FeatureMap
        Feature map the model was trained with.
    trajectories : Iterable[Trajectory]
        Trajectories to score.

    Returns
    -------
    scores : pandas.DataFrame
        Columns `trajectory`, `length`, `probability` and
        `log_likelihood`.
    """

    rows = []
    restarts = 0
    for i, trajectory in enumerate(trajectories):
        weights = feature_map.observation.evaluate(
            trajectory.observations[:, None, :], trajectory.actions[:, None]
        )

        b = model.initial_state()
        log_likelihood = 0.0
        for action, obs_weights in zip(trajectory.actions, weights):
            predicted = model.b_inf @ compose_operator(model, action, obs_weights) @ b.vector
            log_likelihood += np.log(clamp_probability(predicted))
            try:
                b = filter_update(model, b, action, obs_weights)
            except DegenerateUpdate:
                restarts += 1
                b = model.initial_state()

        rows.append(
            {
                "trajectory": i,
                "length": len(trajectory.actions),
                "probability": sequence_probability(model, trajectory.actions, weights),
                "log_likelihood": log_likelihood,
            }
        )

    if restarts:
        logging.warning(f"Filtering restarted {restarts} times on degenerate updates")

    return pd.DataFrame(rows, columns=["trajectory", "length", "probability", "log_likelihood"])
