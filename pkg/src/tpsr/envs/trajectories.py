"""Trajectories and their text file format.

A trajectory file starts with the header `PSRTRAJ v1 <obs_dim>
<num_actions>`. Each following line is one record `action_id, o_1, ...,
o_d`, and a blank line separates trajectories (reset boundaries).
Per-step events that are not part of the observation stream, like
rewards and collision flags, live in a separate CSV file.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np
import pandas as pd

from tpsr.errors import FormatError

HEADER = "PSRTRAJ v1"


@dataclass(frozen=True)
class Trajectory:
    """
    A sequence of action-observation pairs recorded from one reset.

    Parameters
    ----------
    actions : numpy.ndarray
        Action ids, shape `(T,)`.
    observations : numpy.ndarray
        Observations received after each action, shape `(T, d)`.
    rewards : numpy.ndarray, optional
        Reward of each step, shape `(T,)`.
    collisions : numpy.ndarray, optional
        Whether each step ended in a collision, shape `(T,)`.
    """

    actions: np.ndarray
    observations: np.ndarray
    rewards: np.ndarray | None = None
    collisions: np.ndarray | None = None

    def __post_init__(self) -> None:
        actions = np.asarray(self.actions, dtype=np.int64)
        observations = np.asarray(self.observations, dtype=np.float64)
        if observations.ndim == 1:
            observations = observations[:, None]

        assert actions.ndim == 1 and len(actions) >= 1, "A trajectory cannot be empty"
        assert len(observations) == len(actions), "One observation per action is required"

        object.__setattr__(self, "actions", actions)
        object.__setattr__(self, "observations", observations)
        for name in ("rewards", "collisions"):
            value = getattr(self, name)
            if value is not None:
                value = np.asarray(value, dtype=bool if name == "collisions" else np.float64)
                assert len(value) == len(actions), f"One entry of {name} per step is required"
                object.__setattr__(self, name, value)

    def __len__(self) -> int:
        return len(self.actions)

    @property
    def obs_dim(self) -> int:
        """Dimension of each observation."""
        return self.observations.shape[1]


def write_trajectories(
    trajectories: Iterable[Trajectory], path: str | Path, num_actions: int
) -> int:
    """
    Write trajectories in the text format.

    Floats are written with `repr` so that reading the file back gives
    the same numbers bit for bit.

    Parameters
    ----------
    trajectories : Iterable[Trajectory]
        Trajectories to write. All must share one observation dimension.
    path : str or pathlib.Path
        Output file.
    num_actions : int
        Size of the action set.

    Returns
    -------
    count : int
        Number of trajectories written.
    """

    trajectories = list(trajectories)
    assert trajectories, "There are no trajectories to write"
    obs_dim = trajectories[0].obs_dim

    blocks = []
    for trajectory in trajectories:
        assert trajectory.obs_dim == obs_dim, "Observation dimension varies between trajectories"
        lines = [
            ", ".join([str(action), *map(repr, map(float, observation))])
            for action, observation in zip(trajectory.actions, trajectory.observations)
        ]
        blocks.append("\n".join(lines))

    with open(path, "w", encoding="utf-8") as f:
        f.write(f"{HEADER} {obs_dim} {num_actions}\n")
        f.write("\n\n".join(blocks))
        f.write("\n")

    return len(trajectories)


def _parse_header(line: str, path: str | Path) -> tuple[int, int]:
    """Read the observation dimension and action count from the header."""

    parts = line.split()
    if len(parts) != 4 or " ".join(parts[:2]) != HEADER:
        raise FormatError(f"{path}:1: expected header '{HEADER} <obs_dim> <num_actions>'")
    try:
        obs_dim, num_actions = int(parts[2]), int(parts[3])
    except ValueError as e:
        raise FormatError(f"{path}:1: header dimensions must be integers") from e
    if obs_dim < 1 or num_actions < 1:
        raise FormatError(f"{path}:1: header dimensions must be positive")

    return obs_dim, num_actions


def read_trajectories(path: str | Path) -> tuple[list[Trajectory], int]:
    """
    Read a trajectory file.

    Parameters
    ----------
    path : str or pathlib.Path
        File to read.

    Returns
    -------
    trajectories : list[Trajectory]
        Trajectories in file order.
    num_actions : int
        Size of the action set declared in the header.

    Raises
    ------
    FormatError
        If the file breaks the format; the message names the line.
    """

    try:
        with open(path, encoding="utf-8") as f:
            lines = f.read().splitlines()
    except OSError as e:
        raise FormatError(f"Cannot read trajectory file {path}: {e}") from e

    if not lines:
        raise FormatError(f"{path}: file is empty")
    obs_dim, num_actions = _parse_header(lines[0], path)

    trajectories, actions, observations = [], [], []
    for number, line in enumerate(lines[1:], start=2):
        if not line.strip():
            if actions:
                trajectories.append(Trajectory(np.array(actions), np.array(observations)))
                actions, observations = [], []
            continue

        fields = line.split(",")
        if len(fields) != obs_dim + 1:
            raise FormatError(f"{path}:{number}: expected {obs_dim + 1} fields, got {len(fields)}")
        try:
            action = int(fields[0])
            observation = [float(x) for x in fields[1:]]
        except ValueError as e:
            raise FormatError(f"{path}:{number}: {e}") from e
        if not 0 <= action < num_actions:
            raise FormatError(f"{path}:{number}: action {action} is out of range")

        actions.append(action)
        observations.append(observation)

    if actions:
        trajectories.append(Trajectory(np.array(actions), np.array(observations)))
    if not trajectories:
        raise FormatError(f"{path}: file holds no trajectories")

    return trajectories, num_actions


def events_frame(trajectories: Iterable[Trajectory]) -> pd.DataFrame:
    """Collect the per-step actions, rewards and collision flags."""

    frames = []
    for i, trajectory in enumerate(trajectories):
        steps = len(trajectory)
        frames.append(
            pd.DataFrame(
                {
                    "trajectory": i,
                    "step": np.arange(steps),
                    "action": trajectory.actions,
                    "reward": np.zeros(steps)
                    if trajectory.rewards is None
                    else trajectory.rewards,
                    "collision": np.zeros(steps, dtype=bool)
                    if trajectory.collisions is None
                    else trajectory.collisions,
                }
            )
        )

    return pd.concat(frames, ignore_index=True)


def attach_events(trajectories: list[Trajectory], events: pd.DataFrame) -> list[Trajectory]:
    """
    Attach rewards and collision flags from an events table.

    Raises
    ------
    FormatError
        If the events do not line up with the trajectories.
    """

    attached = []
    groups = dict(tuple(events.groupby("trajectory", sort=True)))
    for i, trajectory in enumerate(trajectories):
        group = groups.get(i)
        if group is None or len(group) != len(trajectory):
            raise FormatError(f"Events for trajectory {i} do not match its length")
        group = group.sort_values("step")
        if not np.array_equal(group["action"].to_numpy(), trajectory.actions):
            raise FormatError(f"Events for trajectory {i} disagree on the actions taken")
        attached.append(
            Trajectory(
                trajectory.actions,
                trajectory.observations,
                rewards=group["reward"].to_numpy(dtype=np.float64),
                collisions=group["collision"].to_numpy(dtype=bool),
            )
        )

    return attached
