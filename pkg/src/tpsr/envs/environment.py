"""Stateful environments and trajectory collection."""

import logging
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from tpsr.envs.arena import (
    NUM_ACTIONS,
    Pose,
    VisionArena,
    arena_render,
    arena_step,
    is_goal,
    random_free_pose,
)
from tpsr.envs.pomdp import Pomdp
from tpsr.envs.trajectories import Trajectory
from tpsr.errors import ValidationError

#: Draws allowed when looking for a start pose away from the goal.
MAX_RESET_DRAWS = 1000


@dataclass(frozen=True)
class StepResult:
    """What the environment returns after one action."""

    observation: np.ndarray
    reward: float
    collision: bool = False
    goal: bool = False


@dataclass(frozen=True)
class RewardSpec:
    """
    Rewards of the arena task.

    Parameters
    ----------
    goal_reward : float
        Reward for a step that ends looking at the goal.
    collision_reward : float
        Reward for a step cut short by a collision.
    default_reward : float
        Reward of every other step.
    """

    goal_reward: float = 1000.0
    collision_reward: float = -1.0
    default_reward: float = 0.0

    def score(self, goal: bool, collision: bool) -> float:
        if goal:
            return self.goal_reward
        if collision:
            return self.collision_reward

        return self.default_reward


class Environment(Protocol):
    """A resettable environment driven by action ids."""

    num_actions: int
    observation_dim: int

    def reset(self, rng: np.random.Generator) -> None: ...

    def step(self, action: int, rng: np.random.Generator) -> StepResult: ...

    def is_goal(self) -> bool: ...


class PomdpEnvironment:
    """
    A discrete POMDP as an environment.

    Observations are one-element arrays holding the observation symbol
    and rewards are `r(s, a)` of the state the action is taken in.
    A POMDP has no goal.
    """

    def __init__(self, p: Pomdp) -> None:
        self.p = p
        self.num_actions = p.num_actions
        self.observation_dim = 1
        self.state = 0

    def reset(self, rng: np.random.Generator) -> None:
        self.state = int(rng.choice(self.p.num_states, p=self.p.initial_belief))

    def step(self, action: int, rng: np.random.Generator) -> StepResult:
        if not 0 <= action < self.num_actions:
            raise ValidationError(f"Action {action} is outside 0..{self.num_actions - 1}")

        reward = float(self.p.reward[self.state, action])
        self.state = int(rng.choice(self.p.num_states, p=self.p.transition[action, self.state]))
        obs = int(rng.choice(self.p.num_obs, p=self.p.emission[action, self.state]))

        return StepResult(np.array([float(obs)]), reward)

    def is_goal(self) -> bool:
        return False


class ArenaEnvironment:
    """
    The camera robot in its arena, scored by a reward spec.

    Observations are flattened RGB images. Episodes start at a random
    collision-free pose that does not already show the goal.
    """

    def __init__(self, arena: VisionArena, rewards: RewardSpec | None = None) -> None:
        self.arena = arena
        self.rewards = rewards or RewardSpec()
        self.num_actions = NUM_ACTIONS
        self.observation_dim = arena.observation_dim
        self.pose = Pose(arena.side / 4, arena.side / 4, 0.0)

    def reset(self, rng: np.random.Generator) -> None:
        for _ in range(MAX_RESET_DRAWS):
            self.pose = random_free_pose(self.arena, rng)
            if not self.is_goal():
                return

        logging.warning("Every drawn start pose already shows the goal")

    def observe(self) -> np.ndarray:
        return arena_render(self.pose, self.arena).ravel()

    def step(self, action: int, rng: np.random.Generator) -> StepResult:
        if not 0 <= action < self.num_actions:
            raise ValidationError(f"Action {action} is outside 0..{self.num_actions - 1}")

        self.pose, collision = arena_step(self.arena, self.pose, action, rng)
        observation = self.observe()
        goal = is_goal(self.arena, observation)

        return StepResult(observation, self.rewards.score(goal, collision), collision, goal)

    def is_goal(self) -> bool:
        return bool(is_goal(self.arena, self.observe()))


def collect_trajectories(env: Environment, count: int, length: int, seed) -> list[Trajectory]:
    """
    Record trajectories of uniformly random actions.

    Trajectory `i` resets the environment and draws its actions and
    noise from `default_rng((seed, i))`, so every trajectory can be
    reproduced on its own.

    Parameters
    ----------
    env : Environment
        The environment.
    count : int
        Number of trajectories.
    length : int
        Action-observation pairs per trajectory.
    seed : int
        Root seed.

    Returns
    -------
    list[Trajectory]
        Trajectories carrying their rewards and collision flags.
    """

    if count < 1 or length < 1:
        raise ValidationError(f"Need positive count and length, got {count} and {length}")

    trajectories = []
    for i in range(count):
        rng = np.random.default_rng((seed, i))
        env.reset(rng)
        actions = rng.integers(env.num_actions, size=length)
        results = [env.step(int(action), rng) for action in actions]
        trajectories.append(
            Trajectory(
                actions,
                np.stack([result.observation for result in results]),
                rewards=np.array([result.reward for result in results]),
                collisions=np.array([result.collision for result in results]),
            )
        )
        if (i + 1) % 1000 == 0:
            logging.info(f"Collected {i + 1} of {count} trajectories")

    return trajectories
