"""A simulated robot with a camera in a square arena.

The arena is the square `[0, side]^2` surrounded by four walls of
distinct colors, with a square obstacle in its middle. The robot is a
disk with a forward-facing pinhole camera; it can drive forward one
unit and rotate by 15 degrees either way, giving six actions. Headings
are in degrees, counter-clockwise from the positive x axis.
"""

from dataclasses import dataclass

import numpy as np

from tpsr.errors import ConfigError

#: Rotation of each action in degrees, indexed by `action % 3`.
ROTATIONS = (-15.0, 0.0, 15.0)

#: Number of actions: forward in {0, 1} times the three rotations.
NUM_ACTIONS = 6

ACTION_LABELS = (
    "turn-right",
    "stay",
    "turn-left",
    "forward-right",
    "forward",
    "forward-left",
)

#: Surface ids, also the row order of the palette.
WEST, NORTH, EAST, SOUTH, OBSTACLE = range(5)

PALETTE = np.array(
    [
        [1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 1.0, 0.0],
        [1.0, 1.0, 0.0],
        [1.0, 0.0, 1.0],
    ]
)

#: Points checked along a path before bisecting for the contact point.
PATH_SAMPLES = 64

#: Bisection steps locating the contact point.
BISECTIONS = 30

#: Poses rendered per vectorized batch.
RENDER_CHUNK = 2048


@dataclass(frozen=True)
class Pose:
    """Position and heading (degrees) of the robot."""

    x: float
    y: float
    theta: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta])


@dataclass(frozen=True)
class VisionArena:
    """
    Geometry, camera and motion noise of the arena.

    Parameters
    ----------
    side : float
        Length of the arena walls.
    robot_radius : float
        Radius of the robot's disk.
    obstacle_size : float
        Side of the centered square obstacle.
    wall_height : float
        Height of the walls and the obstacle.
    camera_height : float
        Height of the camera above the floor.
    fov : float
        Horizontal and vertical field of view in degrees.
    resolution : int
        Side of the square camera image in pixels.
    sigma_translation : float
        Standard deviation of the position noise of a forward move.
    sigma_rotation : float
        Standard deviation in degrees of the heading noise of a turn.
    goal_tolerance : float
        Largest mean absolute pixel difference from a full-frame blue
        image that still counts as reaching the goal.
    """

    side: float = 45.0
    robot_radius: float = 2.0
    obstacle_size: float = 9.0
    wall_height: float = 8.0
    camera_height: float = 2.0
    fov: float = 45.0
    resolution: int = 16
    sigma_translation: float = 0.1
    sigma_rotation: float = 1.0
    goal_tolerance: float = 0.05

    def __post_init__(self) -> None:
        if self.side <= 2 * self.robot_radius:
            raise ConfigError(f"A robot of radius {self.robot_radius} does not fit the arena")
        if self.obstacle_size < 0 or self.obstacle_size >= self.side - 4 * self.robot_radius:
            raise ConfigError(f"An obstacle of size {self.obstacle_size} blocks the arena")
        if not 0 < self.fov < 180:
            raise ConfigError(f"The field of view must lie in (0, 180) degrees, got {self.fov}")
        if self.resolution < 1:
            raise ConfigError(f"The camera needs at least one pixel, got {self.resolution}")
        if min(self.sigma_translation, self.sigma_rotation, self.goal_tolerance) < 0:
            raise ConfigError("Noise scales and the goal tolerance must be nonnegative")

    @property
    def obstacle_bounds(self) -> tuple[float, float]:
        half = self.obstacle_size / 2
        centre = self.side / 2

        return centre - half, centre + half

    @property
    def observation_dim(self) -> int:
        return 3 * self.resolution**2


def _pixel_offsets(arena: VisionArena) -> np.ndarray:
    """Offsets of the pixel centres on the focal plane, first pixel at +half-width."""

    half_width = np.tan(np.radians(arena.fov) / 2)
    centres = (np.arange(arena.resolution) + 0.5) / arena.resolution

    return half_width * (1 - 2 * centres)


def _slab(position, direction, low, high):
    """Entry and exit parameters of rays through the slab `[low, high]` of one axis."""

    inside = (position > low) & (position < high)
    with np.errstate(divide="ignore", invalid="ignore"):
        first = (low - position) / direction
        second = (high - position) / direction
    parallel = direction == 0
    near = np.where(parallel, np.where(inside, -np.inf, np.inf), np.minimum(first, second))
    far = np.where(parallel, np.where(inside, np.inf, -np.inf), np.maximum(first, second))

    return near, far


def cast_rays(
    arena: VisionArena, x: np.ndarray, y: np.ndarray, dx: np.ndarray, dy: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """
    Cast horizontal rays and report the first surface each one hits.

    Parameters
    ----------
    arena : VisionArena
        The arena.
    x, y : numpy.ndarray
        Ray origins, broadcastable against the directions.
    dx, dy : numpy.ndarray
        Ray directions.

    Returns
    -------
    distance : numpy.ndarray
        Ray parameter of the hit, in units of the direction vector.
    surface : numpy.ndarray
        Id of the surface hit.
    """

    x, y, dx, dy = np.broadcast_arrays(x, y, dx, dy)
    with np.errstate(divide="ignore", invalid="ignore"):
        tx = np.where(dx > 0, (arena.side - x) / dx, np.where(dx < 0, -x / dx, np.inf))
        ty = np.where(dy > 0, (arena.side - y) / dy, np.where(dy < 0, -y / dy, np.inf))

    distance = np.minimum(tx, ty)
    surface = np.where(tx <= ty, np.where(dx > 0, EAST, WEST), np.where(dy > 0, NORTH, SOUTH))

    low, high = arena.obstacle_bounds
    near_x, far_x = _slab(x, dx, low, high)
    near_y, far_y = _slab(y, dy, low, high)
    near = np.maximum(near_x, near_y)
    far = np.minimum(far_x, far_y)
    blocked = (near <= far) & (near > 0) & (near < distance)

    distance = np.where(blocked, near, distance)
    surface = np.where(blocked, OBSTACLE, surface)

    return distance, surface


def render_poses(arena: VisionArena, poses: np.ndarray) -> np.ndarray:
    """
    Render the camera images of many poses.

    Every pixel column casts one horizontal ray through the focal plane
    one unit ahead of the camera; a pixel row shows the surface color
    where the ray's height lies between the floor and the top of the
    walls, and black otherwise.

    Parameters
    ----------
    arena : VisionArena
        The arena.
    poses : numpy.ndarray
        Rows `(x, y, theta)`, shape `(m, 3)`.

    Returns
    -------
    numpy.ndarray
        RGB images with values in `[0, 1]`, shape `(m, R, R, 3)`.
    """

    poses = np.atleast_2d(np.asarray(poses, dtype=np.float64))
    offsets = _pixel_offsets(arena)
    images = np.empty((len(poses), arena.resolution, arena.resolution, 3))

    for start in range(0, len(poses), RENDER_CHUNK):
        chunk = poses[start : start + RENDER_CHUNK]
        heading = np.radians(chunk[:, 2])
        cos, sin = np.cos(heading)[:, None], np.sin(heading)[:, None]
        # Columns sweep from the left edge of the view to the right
        dx = cos - sin * offsets[None, :]
        dy = sin + cos * offsets[None, :]
        distance, surface = cast_rays(arena, chunk[:, :1], chunk[:, 1:2], dx, dy)

        heights = arena.camera_height + distance[:, None, :] * offsets[None, :, None]
        visible = (heights >= 0) & (heights <= arena.wall_height)
        colors = PALETTE[surface][:, None, :, :]
        images[start : start + RENDER_CHUNK] = np.where(visible[..., None], colors, 0.0)

    return images


def arena_render(pose: Pose, arena: VisionArena) -> np.ndarray:
    """The `(R, R, 3)` camera image at one pose."""
    return render_poses(arena, pose.as_array()[None])[0]


def pose_is_free(arena: VisionArena, x, y) -> np.ndarray:
    """Whether the robot's disk at `(x, y)` stays clear of the walls and the obstacle."""

    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    r = arena.robot_radius
    inside = (x >= r) & (x <= arena.side - r) & (y >= r) & (y <= arena.side - r)

    low, high = arena.obstacle_bounds
    gap_x = np.maximum(np.maximum(low - x, x - high), 0)
    gap_y = np.maximum(np.maximum(low - y, y - high), 0)

    return inside & (gap_x**2 + gap_y**2 >= r**2)


def random_free_pose(arena: VisionArena, rng: np.random.Generator) -> Pose:
    """Draw a collision-free pose uniformly at random."""

    r = arena.robot_radius
    while True:
        x, y = rng.uniform(r, arena.side - r, size=2)
        if pose_is_free(arena, x, y):
            return Pose(float(x), float(y), float(rng.uniform(0, 360)))


def decode_action(action: int) -> tuple[bool, float]:
    """Split an action id into its forward flag and rotation in degrees."""

    assert 0 <= action < NUM_ACTIONS, f"Unknown action {action}"

    return action >= 3, ROTATIONS[action % 3]


def _contact_fraction(arena: VisionArena, start: np.ndarray, end: np.ndarray) -> float | None:
    """Fraction of the path travelled before first contact, or None if the path is free."""

    fractions = np.arange(1, PATH_SAMPLES + 1) / PATH_SAMPLES
    points = start + fractions[:, None] * (end - start)
    free = pose_is_free(arena, points[:, 0], points[:, 1])
    if free.all():
        return None

    first = int(np.argmin(free))
    low = fractions[first - 1] if first > 0 else 0.0
    high = fractions[first]
    for _ in range(BISECTIONS):
        middle = (low + high) / 2
        point = start + middle * (end - start)
        if pose_is_free(arena, point[0], point[1]):
            low = middle
        else:
            high = middle

    return low


def arena_step(
    arena: VisionArena, pose: Pose, action: int, rng: np.random.Generator | None = None
) -> tuple[Pose, bool]:
    """
    Apply one action: rotate, then drive.

    Gaussian noise perturbs the components the action actually uses: the
    heading of a turn and the end point of a forward move. Without `rng`
    the motion is noise-free. A move that would hit a wall or the
    obstacle stops at the last free point of its path.

    Returns
    -------
    pose : Pose
        The new pose.
    collided : bool
        Whether the move was cut short.
    """

    forward, rotation = decode_action(action)
    theta = pose.theta
    if rotation:
        noise = rng.normal(0, arena.sigma_rotation) if rng is not None else 0.0
        theta = theta + rotation + noise
    theta = float(np.mod(theta, 360.0))

    if not forward:
        return Pose(pose.x, pose.y, theta), False

    start = np.array([pose.x, pose.y])
    heading = np.radians(theta)
    end = start + np.array([np.cos(heading), np.sin(heading)])
    if rng is not None:
        end = end + rng.normal(0, arena.sigma_translation, size=2)

    fraction = _contact_fraction(arena, start, end)
    if fraction is None:
        return Pose(float(end[0]), float(end[1]), theta), False

    stop = start + fraction * (end - start)

    return Pose(float(stop[0]), float(stop[1]), theta), True


def goal_image(arena: VisionArena) -> np.ndarray:
    """A full-frame image of the blue wall."""
    return np.broadcast_to(PALETTE[NORTH], (arena.resolution, arena.resolution, 3)).copy()


def is_goal(arena: VisionArena, images: np.ndarray) -> np.ndarray | bool:
    """Whether images (`(..., R, R, 3)` or flattened) look straight at the blue wall."""

    images = np.asarray(images, dtype=np.float64)
    flat = images.reshape(-1, arena.observation_dim)
    reached = np.abs(flat - goal_image(arena).ravel()).mean(axis=1) <= arena.goal_tolerance

    return bool(reached[0]) if images.size == arena.observation_dim else reached


def goal_predicate(arena: VisionArena):
    """Vectorized goal test over poses, `(xs, ys, thetas) -> mask`."""

    def predicate(xs, ys, thetas) -> np.ndarray:
        poses = np.column_stack(np.broadcast_arrays(xs, ys, thetas)).astype(np.float64)
        return np.atleast_1d(is_goal(arena, render_poses(arena, poses)))

    return predicate
