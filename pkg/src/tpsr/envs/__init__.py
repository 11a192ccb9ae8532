"""Environments, ground-truth oracles and trajectory files."""

from .trajectories import (
    Trajectory,
    attach_events,
    events_frame,
    read_trajectories,
    write_trajectories,
)
from .pomdp import (
    Pomdp,
    forward_probability,
    forward_probability_table,
    history_state,
    pomdp_sample,
    random_pomdp,
    read_pomdp,
    sample_trajectories,
    three_state_pomdp,
    tiger_pomdp,
    write_pomdp,
)
from .oracle import OraclePsr, enumerate_products, oracle_model, oracle_reward, pomdp_to_psr
from .exact import enumerate_windows, exact_estimates, exact_value_iteration
from .arena import (
    Pose,
    VisionArena,
    arena_render,
    arena_step,
    goal_predicate,
    is_goal,
    pose_is_free,
    random_free_pose,
    render_poses,
)
from .astar import LatticePlanner, astar_optimal_steps
from .environment import (
    ArenaEnvironment,
    Environment,
    PomdpEnvironment,
    RewardSpec,
    StepResult,
    collect_trajectories,
)

__all__ = [
    "ArenaEnvironment",
    "Environment",
    "LatticePlanner",
    "OraclePsr",
    "Pomdp",
    "PomdpEnvironment",
    "Pose",
    "RewardSpec",
    "StepResult",
    "Trajectory",
    "VisionArena",
    "arena_render",
    "arena_step",
    "astar_optimal_steps",
    "attach_events",
    "collect_trajectories",
    "enumerate_products",
    "enumerate_windows",
    "events_frame",
    "exact_estimates",
    "exact_value_iteration",
    "forward_probability",
    "forward_probability_table",
    "goal_predicate",
    "history_state",
    "is_goal",
    "oracle_model",
    "oracle_reward",
    "pomdp_sample",
    "pomdp_to_psr",
    "pose_is_free",
    "random_free_pose",
    "random_pomdp",
    "read_pomdp",
    "read_trajectories",
    "render_poses",
    "sample_trajectories",
    "three_state_pomdp",
    "tiger_pomdp",
    "write_pomdp",
    "write_trajectories",
]
