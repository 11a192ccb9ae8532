"""Linear reward models over states, fitted by regression."""

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import linalg

from tpsr.errors import InsufficientSamples

#: Ridge term added to the normal equations.
RIDGE = 1e-8


@dataclass(frozen=True)
class RewardModel:
    """
    One reward vector per action: `r(b, a) = eta[a] . b`.

    Parameters
    ----------
    eta : numpy.ndarray
        Reward vectors as rows, shape `(num_actions, n)`.
    """

    eta: np.ndarray

    def __post_init__(self) -> None:
        eta = np.array(self.eta, dtype=np.float64, ndmin=2)
        assert np.all(np.isfinite(eta)), "Reward vectors must be finite"
        eta.setflags(write=False)
        object.__setattr__(self, "eta", eta)

    @property
    def num_actions(self) -> int:
        """Number of actions."""
        return len(self.eta)

    def expected(self, points: np.ndarray) -> np.ndarray:
        """Expected rewards of every action at each state, shape `(m, A)`."""
        return np.atleast_2d(points) @ self.eta.T

    def scaled(self, factor: float) -> "RewardModel":
        """Multiply every reward vector by a constant."""
        return RewardModel(self.eta * factor)


def learn_reward(
    states: np.ndarray, actions: np.ndarray, rewards: np.ndarray, num_actions: int
) -> RewardModel:
    """
    Regress observed rewards on the states they were received in.

    For each action `a`, `eta_a` solves `(X^T X + 1e-8 I) eta = X^T y`
    over the samples where `a` was taken.

    Parameters
    ----------
    states : numpy.ndarray
        States, shape `(N, n)`.
    actions : numpy.ndarray
        Action taken in each state, shape `(N,)`.
    rewards : numpy.ndarray
        Reward received, shape `(N,)`.
    num_actions : int
        Size of the action set.

    Returns
    -------
    reward : RewardModel
        The fitted reward model.

    Raises
    ------
    InsufficientSamples
        If an action has fewer than `n` samples.
    """

    states = np.asarray(states, dtype=np.float64)
    actions = np.asarray(actions, dtype=np.int64)
    rewards = np.asarray(rewards, dtype=np.float64)
    n = states.shape[1]

    eta = np.zeros((num_actions, n))
    for action in range(num_actions):
        rows = actions == action
        count = int(rows.sum())
        if count < n:
            raise InsufficientSamples(action, count, n)

        x, y = states[rows], rewards[rows]
        eta[action] = linalg.solve(x.T @ x + RIDGE * np.eye(n), x.T @ y, assume_a="pos")

    return RewardModel(eta)


def reward_residuals(
    reward: RewardModel, states: np.ndarray, actions: np.ndarray, rewards: np.ndarray
) -> pd.DataFrame:
    """Summarize the training fit per action: sample count and residual RMS."""

    predicted = np.einsum("nd,nd->n", np.asarray(states), reward.eta[np.asarray(actions)])
    frame = pd.DataFrame({"action": actions, "residual": np.asarray(rewards) - predicted})
    summary = (
        frame.groupby("action")["residual"]
        .agg(count="size", rms=lambda r: float(np.sqrt(np.mean(r**2))))
        .reindex(range(reward.num_actions), fill_value=0)
        .reset_index()
    )
    for i in range(reward.eta.shape[1]):
        summary[f"eta_{i}"] = reward.eta[:, i]

    logging.info(f"Reward fit residual RMS by action: {summary['rms'].round(4).tolist()}")

    return summary
