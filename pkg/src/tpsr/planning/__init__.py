"""Reward learning, point-based planning and policy execution."""

from .executor import EpisodeResult, PolicyExecutor, run_random_episode
from .perseus import (
    PlannerConfig,
    PlanResult,
    branch_states,
    greedy_action,
    lower_bound_value,
    observation_likelihoods,
    pbvi_backup,
    perseus,
    perseus_sweep,
    q_values,
)
from .reward import RewardModel, learn_reward, reward_residuals
from .value import ValueFunction, load_value_function, save_value_function

__all__ = [
    "EpisodeResult",
    "PlanResult",
    "PlannerConfig",
    "PolicyExecutor",
    "RewardModel",
    "ValueFunction",
    "branch_states",
    "greedy_action",
    "learn_reward",
    "load_value_function",
    "lower_bound_value",
    "observation_likelihoods",
    "pbvi_backup",
    "perseus",
    "perseus_sweep",
    "q_values",
    "reward_residuals",
    "run_random_episode",
    "save_value_function",
]
