"""Unit tests for the `astar` module."""

import numpy as np
import pytest

from tpsr.envs.arena import Pose, VisionArena, goal_predicate
from tpsr.envs.astar import NUM_HEADINGS, LatticePlanner, astar_optimal_steps
from tpsr.errors import Unreachable


def corridor_goal(threshold):
    """A goal holding everywhere east of a vertical line."""
    return lambda xs, ys, thetas: np.asarray(xs) >= threshold


def test_start_at_goal(quiet_arena):
    """Test that a start inside the goal needs no steps."""

    assert astar_optimal_steps(Pose(10.0, 10.0, 0.0), corridor_goal(5), quiet_arena) == 0


def test_straight_corridor(quiet_arena):
    """Test that driving east reaches the line in one step per unit."""

    assert astar_optimal_steps(Pose(5.0, 5.0, 0.0), corridor_goal(10), quiet_arena) == 5


def test_turning_costs_steps(quiet_arena):
    """Test that facing a heading 90 degrees away takes six turns."""

    def goal(xs, ys, thetas):
        return np.isclose(thetas, 90.0)

    assert astar_optimal_steps(Pose(10.0, 10.0, 0.0), goal, quiet_arena) == 6


def test_planner_is_reusable(quiet_arena):
    """Test repeated queries and snapping of off-lattice poses."""

    planner = LatticePlanner(quiet_arena, corridor_goal(10))

    assert planner.snap(Pose(5.2, 4.9, 14.0)) == (5, 5, 1)
    assert planner.snap(Pose(22.5, 22.5, 0.0))[:2] != (22, 22)
    assert planner.optimal_steps(Pose(5.0, 5.0, 0.0)) == 5
    assert planner.optimal_steps(Pose(8.0, 5.0, 0.0)) == 2


def test_blocked_moves_stay_put(quiet_arena):
    """Test that a move into a wall leaves the lattice state unchanged."""

    planner = LatticePlanner(quiet_arena, corridor_goal(10))
    west = NUM_HEADINGS // 2

    assert planner.successor((2, 5, west), 4) == (2, 5, west)
    assert planner.successor((3, 5, west), 4) == (2, 5, west)
    assert planner.successor((3, 5, west), 3) == (2, 5, west - 1)
    assert planner.successor((3, 5, west), 0) == (3, 5, west - 1)


def test_unreachable(quiet_arena):
    """Test that a goal that never holds is unreachable."""

    with pytest.raises(Unreachable):
        astar_optimal_steps(Pose(10.0, 10.0, 0.0), corridor_goal(100), quiet_arena)


def test_blue_wall_goal():
    """Test the camera goal: one step forward brings the wall into full view."""

    arena = VisionArena(resolution=4, sigma_translation=0.0, sigma_rotation=0.0)

    assert astar_optimal_steps(Pose(22.0, 38.0, 90.0), goal_predicate(arena), arena) == 1
