"""Shortest action sequences in the noise-free, discretized arena."""

import heapq
import logging
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree

from tpsr.envs.arena import NUM_ACTIONS, Pose, VisionArena, decode_action, pose_is_free
from tpsr.errors import Unreachable

#: Headings of the lattice, 15 degrees apart.
NUM_HEADINGS = 24

#: Longest move between lattice cells (a diagonal step).
MAX_STEP = np.sqrt(2.0)

#: Points checked along each lattice move.
MOVE_SAMPLES = 8

GoalPredicate = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


class LatticePlanner:
    """
    A* search over integer positions and 24 headings of the arena.

    Turning changes the heading index by one; driving forward moves to
    the cell nearest to one unit ahead, so a move covers at most a
    diagonal. Moves into or through occupied space leave the
    configuration unchanged and are never part of a shortest path. The
    goal cells and the heuristic tree are computed once, so repeated
    queries share them.

    Parameters
    ----------
    arena : VisionArena
        The arena.
    goal : callable
        Vectorized predicate `(xs, ys, thetas) -> mask` over poses, with
        headings in degrees.
    """

    def __init__(self, arena: VisionArena, goal: GoalPredicate) -> None:
        self.arena = arena
        size = int(np.floor(arena.side)) + 1
        xs, ys = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
        self.free = pose_is_free(arena, xs, ys)

        cells = np.argwhere(self.free)
        headings = np.arange(NUM_HEADINGS) * 360.0 / NUM_HEADINGS
        grid_x = np.repeat(cells[:, 0], NUM_HEADINGS).astype(np.float64)
        grid_y = np.repeat(cells[:, 1], NUM_HEADINGS).astype(np.float64)
        grid_heading = np.tile(np.arange(NUM_HEADINGS), len(cells))
        mask = np.asarray(goal(grid_x, grid_y, headings[grid_heading]), dtype=bool)

        self.goals = set(
            zip(
                grid_x[mask].astype(int).tolist(),
                grid_y[mask].astype(int).tolist(),
                grid_heading[mask].tolist(),
            )
        )
        self.cells = cells
        self.cell_tree = cKDTree(cells)
        self.goal_tree = None
        if self.goals:
            self.goal_tree = cKDTree(np.column_stack([grid_x[mask], grid_y[mask]]))

        logging.info(f"Lattice with {len(cells)} free cells and {len(self.goals)} goal states")

    def snap(self, pose: Pose) -> tuple[int, int, int]:
        """The lattice state nearest to a pose."""

        x, y = int(round(pose.x)), int(round(pose.y))
        if not (0 <= x < self.free.shape[0] and 0 <= y < self.free.shape[1] and self.free[x, y]):
            _, index = self.cell_tree.query([pose.x, pose.y])
            x, y = (int(v) for v in self.cells[index])
        heading = int(round(pose.theta / (360.0 / NUM_HEADINGS))) % NUM_HEADINGS

        return x, y, heading

    def heuristic(self, state: tuple[int, int, int]) -> float:
        """Distance to the nearest goal cell over the longest move."""

        distance, _ = self.goal_tree.query(state[:2])

        return float(distance) / MAX_STEP

    def successor(self, state: tuple[int, int, int], action: int) -> tuple[int, int, int]:
        """The noise-free lattice result of one action."""

        x, y, heading = state
        forward, rotation = decode_action(action)
        heading = (heading + int(round(rotation / (360.0 / NUM_HEADINGS)))) % NUM_HEADINGS
        if not forward:
            return x, y, heading

        angle = np.radians(heading * 360.0 / NUM_HEADINGS)
        nx, ny = int(round(x + np.cos(angle))), int(round(y + np.sin(angle)))
        fractions = np.arange(1, MOVE_SAMPLES + 1) / MOVE_SAMPLES
        if not pose_is_free(self.arena, x + fractions * (nx - x), y + fractions * (ny - y)).all():
            return x, y, heading

        return nx, ny, heading

    def optimal_steps(self, start: Pose) -> int:
        """
        Minimum number of actions from a pose to any goal state.

        Raises
        ------
        Unreachable
            If no goal state can be reached.
        """

        if self.goal_tree is None:
            raise Unreachable("The goal predicate holds nowhere in the arena")

        origin = self.snap(start)
        best = {origin: 0}
        frontier = [(self.heuristic(origin), 0, origin)]
        while frontier:
            _, cost, state = heapq.heappop(frontier)
            if state in self.goals:
                return cost
            if cost > best[state]:
                continue
            for action in range(NUM_ACTIONS):
                following = self.successor(state, action)
                if following == state or best.get(following, np.inf) <= cost + 1:
                    continue
                best[following] = cost + 1
                estimate = cost + 1 + self.heuristic(following)
                heapq.heappush(frontier, (estimate, cost + 1, following))

        raise Unreachable(f"No goal state can be reached from {start}")


def astar_optimal_steps(start: Pose, goal: GoalPredicate, arena: VisionArena | None = None) -> int:
    """Minimum action count from `start` to a goal state, for a one-off query."""

    return LatticePlanner(arena or VisionArena(), goal).optimal_steps(start)
