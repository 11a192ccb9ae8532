"""Greedy policy execution in an environment."""

import logging
from collections import deque
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable

import numpy as np

from tpsr.errors import DegenerateUpdate
from tpsr.features.kernels import FeatureMap
from tpsr.model.tpsr import BeliefState, TpsrModel, filter_sequence, filter_update
from tpsr.planning.perseus import q_values
from tpsr.planning.reward import RewardModel
from tpsr.planning.value import ValueFunction

if TYPE_CHECKING:
    from tpsr.envs.environment import Environment

#: Random steps taken to initialise the state before acting greedily.
WARMUP_STEPS = 3

#: Recent steps the state is re-filtered through after a degenerate update.
RECOVERY_STEPS = 3

#: Repeats of a two-step cycle that count as a stall.
STALL_REPEATS = 6

#: Steps of randomized top-two choices after a stall.
STALL_ESCAPE_STEPS = 3


@dataclass(frozen=True)
class EpisodeResult:
    """
    Outcome of one evaluation episode.

    Parameters
    ----------
    episode : int
        Episode number.
    steps : int
        Policy steps taken (warm-up steps excluded).
    success : bool
        Whether the goal was reached within the step budget.
    discounted_return : float
        Discounted sum of the rewards of the policy steps.
    recoveries : int
        Degenerate updates recovered from.
    stalls : int
        Stalls broken by the anti-stall rule.
    """

    episode: int
    steps: int
    success: bool
    discounted_return: float
    recoveries: int = 0
    stalls: int = 0


class PolicyExecutor:
    """
    Run the greedy policy of a value function in an environment.

    Parameters
    ----------
    model : TpsrModel
        Model tracking the state.
    feature_map : FeatureMap
        Feature map turning raw observations into kernel weights.
    vf : ValueFunction
        Value function to act on.
    reward : RewardModel
        Linear reward model used in the lookahead.
    gamma : float
        Discount factor.
    anti_stall : bool
        Whether to break two-step action/observation cycles.
    renormalize : bool
        Whether the lookahead renormalizes likelihoods.
    """

    def __init__(
        self,
        model: TpsrModel,
        feature_map: FeatureMap,
        vf: ValueFunction,
        reward: RewardModel,
        gamma: float,
        anti_stall: bool = False,
        renormalize: bool = True,
    ) -> None:
        self.model = model
        self.feature_map = feature_map
        self.vf = vf
        self.reward = reward
        self.gamma = gamma
        self.anti_stall = anti_stall
        self.renormalize = renormalize

    def observation_weights(self, observation: np.ndarray, action: int) -> np.ndarray:
        """Kernel weights of one raw observation."""

        observation = np.asarray(observation, dtype=np.float64).reshape(1, -1)

        return self.feature_map.observation.evaluate(observation, np.array([action]))

    def recover(self, recent: deque) -> BeliefState:
        """Re-filter the initial state through the most recent steps."""

        actions = [a for a, _ in recent]
        weights = [w for _, w in recent]
        try:
            return filter_sequence(self.model, actions, weights)
        except DegenerateUpdate:
            return self.model.initial_state()

    def update(self, b: BeliefState, action: int, weights: np.ndarray, recent: deque):
        """Filter one step, falling back to `recover` on a degenerate update."""

        recent.append((action, weights))
        try:
            return filter_update(self.model, b, action, weights), False
        except DegenerateUpdate as e:
            logging.debug(f"Recovering from a degenerate update: {e}")
            return self.recover(recent), True

    def choose(self, b: BeliefState, rng: np.random.Generator, escaping: bool) -> int:
        """Greedy action, or a random one of the top two while escaping a stall."""

        q = q_values(self.model, b, self.vf, self.reward, self.gamma, renormalize=self.renormalize)
        if escaping and len(q) > 1:
            top_two = np.argsort(-q, kind="stable")[:2]
            return int(rng.choice(top_two))

        return int(np.argmax(q))

    @staticmethod
    def stalled(history: list[tuple[int, int]]) -> bool:
        """Whether the last steps repeat a two-step cycle `STALL_REPEATS` times."""

        span = 2 * STALL_REPEATS
        if len(history) < span:
            return False

        recent = history[-span:]
        if recent[-1] == recent[-2]:
            return False

        return all(recent[i] == recent[i % 2] for i in range(span))

    def run_episode(
        self,
        env: "Environment",
        max_steps: int,
        rng: np.random.Generator,
        episode: int = 0,
        on_start: Callable[["Environment"], None] | None = None,
    ) -> EpisodeResult:
        """
        Run one episode of greedy execution.

        The state starts from the initial state filtered through
        `WARMUP_STEPS` random steps. The episode ends on reaching the
        goal or after `max_steps` policy steps.

        Parameters
        ----------
        env : Environment
            Environment to act in.
        max_steps : int
            Budget of policy steps.
        rng : np.random.Generator
            Source of the start pose, the warm-up actions and the noise.
        episode : int
            Episode number, for the result and the log.
        on_start : callable, optional
            Called with the environment once the warm-up is over, where
            the policy takes control.
        """

        env.reset(rng)
        recent: deque = deque(maxlen=RECOVERY_STEPS)
        b = self.model.initial_state()
        recoveries = 0

        for _ in range(WARMUP_STEPS):
            action = int(rng.integers(env.num_actions))
            result = env.step(action, rng)
            weights = self.observation_weights(result.observation, action)
            b, recovered = self.update(b, action, weights, recent)
            recoveries += recovered

        if on_start is not None:
            on_start(env)

        history: list[tuple[int, int]] = []
        escape, stalls = 0, 0
        discounted, steps, success = 0.0, 0, False
        while steps < max_steps:
            action = self.choose(b, rng, escape > 0)
            escape = max(escape - 1, 0)

            result = env.step(action, rng)
            discounted += self.gamma**steps * result.reward
            steps += 1
            if result.goal:
                success = True
                break

            weights = self.observation_weights(result.observation, action)
            b, recovered = self.update(b, action, weights, recent)
            recoveries += recovered

            if self.anti_stall:
                history.append((action, int(np.argmax(weights))))
                if escape == 0 and self.stalled(history):
                    stalls += 1
                    escape = STALL_ESCAPE_STEPS
                    history.clear()

        if recoveries:
            logging.warning(f"Episode {episode}: recovered from {recoveries} degenerate updates")

        return EpisodeResult(episode, steps, success, discounted, recoveries, stalls)


def run_random_episode(
    env: "Environment", max_steps: int, rng: np.random.Generator, gamma: float, episode: int = 0
) -> EpisodeResult:
    """Run one episode of uniformly random actions, the baseline policy."""

    env.reset(rng)
    discounted, steps, success = 0.0, 0, False
    while steps < max_steps:
        result = env.step(int(rng.integers(env.num_actions)), rng)
        discounted += gamma**steps * result.reward
        steps += 1
        if result.goal:
            success = True
            break

    return EpisodeResult(episode, steps, success, discounted)
