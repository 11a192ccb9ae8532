"""Piecewise-linear convex value functions and their files.

A value function is a set of alpha-vectors, each tagged with the action
whose backup produced it. The binary file is the magic string `TPVF1`,
little-endian u32 `(count, n)`, the float64 alphas row-major and the u32
action tags; a JSON sidecar carries the feature map reference and the
planner's stage log.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from tpsr.errors import FormatError
from tpsr.model.io import read_json, sidecar_path, write_json

MAGIC = b"TPVF1"


@dataclass(frozen=True)
class ValueFunction:
    """
    A set of alpha-vectors and their action tags.

    Parameters
    ----------
    alphas : numpy.ndarray
        Alpha-vectors as rows, shape `(k, n)` with `k >= 1`.
    actions : numpy.ndarray
        Action tag of each alpha-vector, shape `(k,)`.
    """

    alphas: np.ndarray
    actions: np.ndarray

    def __post_init__(self) -> None:
        alphas = np.array(self.alphas, dtype=np.float64, ndmin=2)
        actions = np.array(self.actions, dtype=np.int64, ndmin=1)
        assert len(alphas) >= 1, "A value function needs at least one alpha-vector"
        assert len(actions) == len(alphas), "One action tag per alpha-vector is required"
        assert np.all(np.isfinite(alphas)), "Alpha-vectors must be finite"
        alphas.setflags(write=False)
        actions.setflags(write=False)
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "actions", actions)

    def __len__(self) -> int:
        return len(self.alphas)

    @property
    def rank_n(self) -> int:
        """Dimension of the states the alphas apply to."""
        return self.alphas.shape[1]

    @classmethod
    def zero(cls, n: int) -> "ValueFunction":
        """The value function `{0}`."""
        return cls(np.zeros((1, n)), np.zeros(1))

    @classmethod
    def constant(cls, alpha: np.ndarray) -> "ValueFunction":
        """The value function holding a single alpha-vector."""
        return cls(np.asarray(alpha)[None, :], np.zeros(1))

    def best_index(self, points: np.ndarray) -> np.ndarray:
        """Index of the maximizing alpha at each point, lowest on ties."""
        return np.argmax(np.atleast_2d(points) @ self.alphas.T, axis=1)

    def value(self, points: np.ndarray) -> np.ndarray | float:
        """Evaluate `max_alpha alpha . b` at one state or a batch of states."""

        points = np.asarray(points, dtype=np.float64)
        values = (np.atleast_2d(points) @ self.alphas.T).max(axis=1)

        return float(values[0]) if points.ndim == 1 else values

    def action(self, points: np.ndarray) -> np.ndarray:
        """Action tag of the maximizing alpha at each point."""
        return self.actions[self.best_index(points)]

    def scaled(self, factor: float) -> "ValueFunction":
        """Multiply every alpha-vector by a constant."""
        return ValueFunction(self.alphas * factor, self.actions)


def save_value_function(
    vf: ValueFunction, path: str | Path, feature_map_ref: str = "", stages: list | None = None
) -> None:
    """Write a value function and its sidecar."""

    dims = np.array([len(vf), vf.rank_n], dtype="<u4")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(dims.tobytes())
        f.write(vf.alphas.astype("<f8").tobytes())
        f.write(vf.actions.astype("<u4").tobytes())

    write_json({"feature_map_ref": feature_map_ref, "stages": stages or []}, sidecar_path(path))


def load_value_function(path: str | Path) -> tuple[ValueFunction, dict]:
    """
    Read a value function written by `save_value_function`.

    Returns
    -------
    vf : ValueFunction
        The value function.
    sidecar : dict
        The sidecar contents.

    Raises
    ------
    FormatError
        If the file is malformed.
    """

    try:
        with open(path, "rb") as f:
            payload = f.read()
    except OSError as e:
        raise FormatError(f"Cannot read value function {path}: {e}") from e

    if payload[: len(MAGIC)] != MAGIC or len(payload) < len(MAGIC) + 8:
        raise FormatError(f"{path} is not a value function file")

    offset = len(MAGIC)
    count, n = np.frombuffer(payload, dtype="<u4", count=2, offset=offset).astype(int)
    offset += 8
    if len(payload) != offset + 8 * count * n + 4 * count:
        raise FormatError(f"{path} has the wrong size for {count} alpha-vectors of length {n}")

    alphas = np.frombuffer(payload, dtype="<f8", count=count * n, offset=offset).reshape(count, n)
    actions = np.frombuffer(payload, dtype="<u4", count=count, offset=offset + 8 * count * n)

    return ValueFunction(alphas, actions.astype(np.int64)), read_json(sidecar_path(path))
