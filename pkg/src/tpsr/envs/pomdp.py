"""Discrete POMDPs: sampling, the forward algorithm and stock instances.

Beliefs are column vectors over states. The observation of a step is
emitted by the state reached after the transition, so the observable
operator of the pair `(a, o)` is `M_ao = diag(O_a[:, o]) T_a^T` and the
probability of a sequence is `1^T M_{a_t o_t} ... M_{a_1 o_1} b_0`.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from tpsr.envs.trajectories import Trajectory
from tpsr.errors import FormatError, ValidationError

#: Tolerance on the row sums of stochastic matrices.
STOCHASTIC_TOL = 1e-12

HEADER = "POMDP v1"


@dataclass(frozen=True)
class Pomdp:
    """
    A discrete POMDP.

    Parameters
    ----------
    transition : numpy.ndarray
        Row-stochastic `T_a[s, s']`, shape `(A, S, S)`.
    emission : numpy.ndarray
        Row-stochastic `O_a[s', o]` over arrival states, shape `(A, S, O)`.
    initial_belief : numpy.ndarray
        Distribution of the first state, shape `(S,)`.
    reward : numpy.ndarray
        Reward `r(s, a)` of taking `a` in `s`, shape `(S, A)`.
    """

    transition: np.ndarray
    emission: np.ndarray
    initial_belief: np.ndarray
    reward: np.ndarray

    def __post_init__(self) -> None:
        for name in ("transition", "emission", "initial_belief", "reward"):
            value = np.array(getattr(self, name), dtype=np.float64)
            value.setflags(write=False)
            object.__setattr__(self, name, value)

        num_actions, num_states = self.transition.shape[:2]
        if self.transition.shape != (num_actions, num_states, num_states):
            raise ValidationError("Transitions must have shape (A, S, S)")
        if self.emission.shape[:2] != (num_actions, num_states):
            raise ValidationError("Emissions must have shape (A, S, O)")
        if self.initial_belief.shape != (num_states,):
            raise ValidationError("The initial belief must have one entry per state")
        if self.reward.shape != (num_states, num_actions):
            raise ValidationError("Rewards must have shape (S, A)")

        for name in ("transition", "emission", "initial_belief"):
            value = getattr(self, name)
            if np.any(value < 0) or np.any(np.abs(value.sum(axis=-1) - 1) > STOCHASTIC_TOL):
                raise ValidationError(f"Rows of {name} must be probability distributions")

    @property
    def num_states(self) -> int:
        """Number of hidden states."""
        return self.transition.shape[1]

    @property
    def num_actions(self) -> int:
        """Number of actions."""
        return self.transition.shape[0]

    @property
    def num_obs(self) -> int:
        """Number of observation symbols."""
        return self.emission.shape[2]

    def observable_operators(self) -> np.ndarray:
        """Operators `M_ao` on beliefs, shape `(A, O, S, S)`."""
        return np.einsum("aso,ats->aost", self.emission, self.transition)


def uniform_policy(p: Pomdp) -> np.ndarray:
    """The uniformly random exploration policy."""
    return np.full(p.num_actions, 1.0 / p.num_actions)


def forward_probability(
    p: Pomdp, actions, observations, belief: np.ndarray | None = None
) -> float:
    """
    Probability of observations under intervention on the actions.

    Parameters
    ----------
    p : Pomdp
        The POMDP.
    actions, observations : Sequence[int]
        Equal-length sequences of action and observation indices.
    belief : numpy.ndarray, optional
        Starting belief. Defaults to the initial belief.

    Returns
    -------
    float
        `Pr[o_1..o_t || a_1..a_t]`; one for the empty sequence.
    """

    assert len(actions) == len(observations), "Sequences must have the same length"

    operators = p.observable_operators()
    b = p.initial_belief if belief is None else np.asarray(belief, dtype=np.float64)
    for action, obs in zip(actions, observations):
        b = operators[int(action), int(obs)] @ b

    return float(b.sum())


def forward_probability_table(
    p: Pomdp, length: int, belief: np.ndarray | None = None
) -> pd.DataFrame:
    """
    Forward-algorithm probability of every sequence of a given length.

    Rows are ordered by sequence index, counting the pair `(a, o)` as
    `a * O + o` with the first step most significant.

    Returns
    -------
    table : pandas.DataFrame
        Columns `action_1, obs_1, ..., action_t, obs_t, probability`.
    """

    pairs = p.num_actions * p.num_obs
    operators = p.observable_operators().reshape(pairs, p.num_states, p.num_states)
    beliefs = (p.initial_belief if belief is None else np.asarray(belief))[None, :]
    for _ in range(length):
        beliefs = np.einsum("pst,kt->kps", operators, beliefs).reshape(-1, p.num_states)

    index = np.arange(len(beliefs))
    columns = {}
    for step in range(length):
        digit = (index // pairs ** (length - 1 - step)) % pairs
        columns[f"action_{step + 1}"] = digit // p.num_obs
        columns[f"obs_{step + 1}"] = digit % p.num_obs
    columns["probability"] = beliefs.sum(axis=1)

    return pd.DataFrame(columns)


def history_state(
    p: Pomdp, past_len: int, belief: np.ndarray | None = None, policy: np.ndarray | None = None
) -> np.ndarray:
    """State distribution after `past_len` steps of the exploration policy."""

    policy = uniform_policy(p) if policy is None else np.asarray(policy)
    mixed = np.einsum("a,ast->st", policy, p.transition)
    b = p.initial_belief if belief is None else np.asarray(belief, dtype=np.float64)
    for _ in range(past_len):
        b = mixed.T @ b

    return b


def _draw(cumulative: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Draw one index per row from stacked cumulative distributions."""

    u = rng.random(len(cumulative))
    index = (cumulative < u[:, None]).sum(axis=1)

    return np.minimum(index, cumulative.shape[1] - 1)


def sample_trajectories(
    p: Pomdp, count: int, length: int, seed, policy: np.ndarray | None = None
) -> list[Trajectory]:
    """
    Sample trajectories from the initial belief, all in lockstep.

    Parameters
    ----------
    p : Pomdp
        The POMDP.
    count : int
        Number of trajectories.
    length : int
        Number of action-observation pairs per trajectory.
    seed : int or tuple
        Seed of the random stream.
    policy : numpy.ndarray, optional
        Action distribution of the exploration policy. Defaults to
        uniform.

    Returns
    -------
    list[Trajectory]
        Trajectories with observations as one-column symbols and the
        reward `r(s, a)` of each step.
    """

    assert length >= 1, "Trajectories need at least one step"

    rng = np.random.default_rng(seed)
    policy = uniform_policy(p) if policy is None else np.asarray(policy)
    transition = np.cumsum(p.transition, axis=-1)
    emission = np.cumsum(p.emission, axis=-1)

    states = _draw(np.tile(np.cumsum(p.initial_belief), (count, 1)), rng)
    actions = np.empty((count, length), dtype=np.int64)
    observations = np.empty((count, length), dtype=np.int64)
    rewards = np.empty((count, length))
    for step in range(length):
        chosen = _draw(np.tile(np.cumsum(policy), (count, 1)), rng)
        rewards[:, step] = p.reward[states, chosen]
        states = _draw(transition[chosen, states], rng)
        observations[:, step] = _draw(emission[chosen, states], rng)
        actions[:, step] = chosen

    return [
        Trajectory(actions[i], observations[i, :, None].astype(np.float64), rewards=rewards[i])
        for i in range(count)
    ]


def pomdp_sample(p: Pomdp, policy: np.ndarray | None, length: int, rng_seed) -> Trajectory:
    """Sample a single trajectory."""
    return sample_trajectories(p, 1, length, rng_seed, policy)[0]


def random_pomdp(
    rng: np.random.Generator,
    num_states: int,
    num_actions: int,
    num_obs: int,
    concentration: float = 1.0,
) -> Pomdp:
    """Draw a POMDP with Dirichlet rows and standard normal rewards."""

    def rows(*shape: int) -> np.ndarray:
        return rng.dirichlet(np.full(shape[-1], concentration), size=shape[:-1])

    return Pomdp(
        transition=rows(num_actions, num_states, num_states),
        emission=rows(num_actions, num_states, num_obs),
        initial_belief=rng.dirichlet(np.full(num_states, concentration)),
        reward=rng.standard_normal((num_states, num_actions)),
    )


def tiger_pomdp(
    listen_accuracy: float = 0.85,
    listen_reward: float = -1.0,
    treasure_reward: float = 10.0,
    tiger_reward: float = -100.0,
) -> Pomdp:
    """
    The two-door tiger problem.

    States are tiger-left and tiger-right; actions are listen,
    open-left and open-right; observations are hear-left and
    hear-right. Opening a door resets the tiger uniformly and yields an
    uninformative observation.
    """

    a = listen_accuracy
    listen = np.eye(2)
    reset = np.full((2, 2), 0.5)
    hear = np.array([[a, 1 - a], [1 - a, a]])

    return Pomdp(
        transition=np.stack([listen, reset, reset]),
        emission=np.stack([hear, reset, reset]),
        initial_belief=np.full(2, 0.5),
        reward=np.array(
            [
                [listen_reward, tiger_reward, treasure_reward],
                [listen_reward, treasure_reward, tiger_reward],
            ]
        ),
    )


def three_state_pomdp() -> Pomdp:
    """A small three-state, two-action, two-observation test system."""

    stay = np.full((3, 3), 0.1) + 0.7 * np.eye(3)
    shift = np.roll(stay, 1, axis=1)
    emission = np.array([[0.9, 0.1], [0.5, 0.5], [0.1, 0.9]])

    return Pomdp(
        transition=np.stack([stay, shift]),
        emission=np.stack([emission, emission]),
        initial_belief=np.array([0.5, 0.3, 0.2]),
        reward=np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 0.5]]),
    )


def write_pomdp(p: Pomdp, path: str | Path) -> None:
    """
    Write a POMDP spec file.

    The file holds the header `POMDP v1 S A O`, the initial belief, the
    `A` blocks of transition rows, the `A` blocks of emission rows and
    the `S` rows of rewards, blocks separated by blank lines.
    """

    def row(values: np.ndarray) -> str:
        return " ".join(repr(float(v)) for v in values)

    blocks = [f"{HEADER} {p.num_states} {p.num_actions} {p.num_obs}", row(p.initial_belief)]
    blocks += ["\n".join(map(row, matrix)) for matrix in p.transition]
    blocks += ["\n".join(map(row, matrix)) for matrix in p.emission]
    blocks.append("\n".join(map(row, p.reward)))

    with open(path, "w", encoding="utf-8") as f:
        f.write("\n\n".join(blocks) + "\n")


def read_pomdp(path: str | Path) -> Pomdp:
    """
    Read a POMDP spec file written by `write_pomdp`.

    Blank lines and lines starting with `#` are ignored.

    Raises
    ------
    FormatError
        If the file is malformed.
    ValidationError
        If the tables are not stochastic.
    """

    try:
        with open(path, encoding="utf-8") as f:
            lines = [
                (number, line.split())
                for number, line in enumerate(f.read().splitlines(), start=1)
                if line.strip() and not line.lstrip().startswith("#")
            ]
    except OSError as e:
        raise FormatError(f"Cannot read POMDP file {path}: {e}") from e

    if not lines or " ".join(lines[0][1][:2]) != HEADER or len(lines[0][1]) != 5:
        raise FormatError(f"{path}: expected header '{HEADER} S A O'")
    try:
        num_states, num_actions, num_obs = (int(x) for x in lines[0][1][2:])
    except ValueError as e:
        raise FormatError(f"{path}: header dimensions must be integers") from e

    widths = [num_states]
    widths += [num_states] * (num_actions * num_states)
    widths += [num_obs] * (num_actions * num_states)
    widths += [num_actions] * num_states
    rows = lines[1:]
    if len(rows) != len(widths):
        raise FormatError(f"{path}: expected {len(widths)} rows of numbers, got {len(rows)}")

    values = []
    for (number, fields), width in zip(rows, widths):
        if len(fields) != width:
            raise FormatError(f"{path}:{number}: expected {width} numbers, got {len(fields)}")
        try:
            values.append([float(x) for x in fields])
        except ValueError as e:
            raise FormatError(f"{path}:{number}: {e}") from e

    t_end = 1 + num_actions * num_states
    o_end = t_end + num_actions * num_states

    return Pomdp(
        transition=np.array(values[1:t_end]).reshape(num_actions, num_states, num_states),
        emission=np.array(values[t_end:o_end]).reshape(num_actions, num_states, num_obs),
        initial_belief=np.array(values[0]),
        reward=np.array(values[o_end:]),
    )
