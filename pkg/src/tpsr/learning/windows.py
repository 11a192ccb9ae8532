"""Slicing trajectories into past, pivot and future windows."""

import logging
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from tpsr.envs.trajectories import Trajectory
from tpsr.errors import EmptyOutput


@dataclass(frozen=True)
class RawWindow:
    """
    One suffix-history window of a trajectory.

    Parameters
    ----------
    offset : int
        Step of the trajectory where the window starts.
    past_actions, past_observations : numpy.ndarray
        The `past_len` pairs before the pivot.
    pivot_action : int
        Action taken at the pivot step.
    pivot_observation : numpy.ndarray
        Observation received at the pivot step.
    future_actions, future_observations : numpy.ndarray
        The `future_len` pairs after the pivot.
    """

    offset: int
    past_actions: np.ndarray
    past_observations: np.ndarray
    pivot_action: int
    pivot_observation: np.ndarray
    future_actions: np.ndarray
    future_observations: np.ndarray


def window_count(length: int, past_len: int, future_len: int, stride: int = 1) -> int:
    """Number of windows that fit in a trajectory of the given length."""

    span = past_len + 1 + future_len
    if length < span:
        return 0

    return (length - span) // stride + 1


def slice_suffix_histories(
    trajectory: Trajectory, past_len: int, future_len: int, stride: int = 1
) -> list[RawWindow]:
    """
    Slice one trajectory into overlapping windows.

    Windows start at offsets `0, stride, 2 * stride, ...`. Each holds
    the `past_len` pairs of the past, the pivot pair and the
    `future_len` pairs of the future.

    Parameters
    ----------
    trajectory : Trajectory
        Trajectory to slice.
    past_len : int
        Number of pairs in the past window.
    future_len : int
        Number of pairs in the future window.
    stride : int
        Distance between consecutive window offsets.

    Returns
    -------
    windows : list[RawWindow]
        Windows in offset order.

    Raises
    ------
    EmptyOutput
        If the trajectory is too short for a single window.
    """

    assert stride >= 1, "stride must be positive"

    count = window_count(len(trajectory), past_len, future_len, stride)
    if count == 0:
        raise EmptyOutput(
            f"A trajectory of length {len(trajectory)} holds no window of "
            f"{past_len} + 1 + {future_len} pairs"
        )

    windows = []
    for offset in range(0, count * stride, stride):
        pivot = offset + past_len
        windows.append(
            RawWindow(
                offset=offset,
                past_actions=trajectory.actions[offset:pivot],
                past_observations=trajectory.observations[offset:pivot],
                pivot_action=int(trajectory.actions[pivot]),
                pivot_observation=trajectory.observations[pivot],
                future_actions=trajectory.actions[pivot + 1 : pivot + 1 + future_len],
                future_observations=trajectory.observations[pivot + 1 : pivot + 1 + future_len],
            )
        )

    return windows


def window_arrays(
    trajectories: Iterable[Trajectory],
    past_len: int,
    future_len: int,
    stride: int = 1,
    burn_in: int = 0,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Stack every window of a set of trajectories into arrays.

    Trajectories too short for a window are skipped with a warning.

    Parameters
    ----------
    trajectories : Iterable[Trajectory]
        Trajectories to slice.
    past_len, future_len : int
        Window layout, as in `slice_suffix_histories`.
    stride : int
        Distance between consecutive window offsets.
    burn_in : int
        Number of leading pairs of every trajectory to drop.

    Returns
    -------
    actions : numpy.ndarray
        Window actions, shape `(N, past_len + 1 + future_len)`.
    observations : numpy.ndarray
        Window observations, shape `(N, past_len + 1 + future_len, d)`.
    origin : numpy.ndarray
        Trajectory index and offset of each window, shape `(N, 2)`.

    Raises
    ------
    EmptyOutput
        If no trajectory holds a single window.
    """

    span = past_len + 1 + future_len
    actions, observations, origin = [], [], []
    skipped = 0
    for i, trajectory in enumerate(trajectories):
        acts = trajectory.actions[burn_in:]
        obs = trajectory.observations[burn_in:]
        if len(acts) < span:
            skipped += 1
            continue

        act_windows = sliding_window_view(acts, span)[::stride]
        obs_windows = sliding_window_view(obs, span, axis=0)[::stride]
        actions.append(act_windows)
        observations.append(np.moveaxis(obs_windows, -1, 1))
        offsets = burn_in + stride * np.arange(len(act_windows))
        origin.append(np.column_stack([np.full(len(offsets), i), offsets]))

    if skipped:
        logging.warning(f"Skipped {skipped} trajectories shorter than {burn_in + span} pairs")
    if not actions:
        raise EmptyOutput(f"No trajectory holds a window of {span} pairs")

    return np.concatenate(actions), np.concatenate(observations), np.concatenate(origin)
