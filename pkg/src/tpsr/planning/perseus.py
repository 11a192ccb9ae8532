"""Point-based value iteration (PBVI and Perseus) over TPSR states.

Observations enter the backup through a finite support of kernel
weight vectors, by default the one-hot vector of every observation
kernel. The likelihood of a support point `o` after action `a` in state
`b` is `b_inf . B(a, o) . b`; by default these are clamped and
renormalized over the support before they weight the future values.
"""

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from tpsr.errors import ConfigError
from tpsr.features.operators import compose_operators
from tpsr.model.tpsr import DEGENERATE_TOL, PROBABILITY_FLOOR, BeliefState, TpsrModel
from tpsr.planning.reward import RewardModel
from tpsr.planning.value import ValueFunction

#: Upper bound on the entries of the intermediate arrays of a backup chunk.
CHUNK_ENTRIES = 4_000_000


def _as_points(points: Sequence[BeliefState] | np.ndarray) -> np.ndarray:
    """Stack belief states (or pass through an array) as rows."""

    if isinstance(points, np.ndarray):
        return np.atleast_2d(points.astype(np.float64))

    return np.stack([p.vector if isinstance(p, BeliefState) else p for p in points])


@dataclass(frozen=True)
class PlannerConfig:
    """
    Settings of the point-based planner.

    Parameters
    ----------
    gamma : float
        Discount factor in `(0, 1)`.
    horizon : int
        Maximum number of stages.
    belief_points : numpy.ndarray or Sequence[BeliefState]
        States the backups are performed at, stacked as rows.
    perseus_subset : int or "all"
        Points backed up per draw: `k` random unimproved points, or
        every point in index order for plain PBVI.
    improvement_tol : float
        Stop once no point improves by more than this in a stage.
    seed : int
        Seed of the point draws.
    renormalize : bool
        Whether observation likelihoods are clamped and renormalized.
    probability_floor : float
        Floor applied to likelihoods when renormalizing.
    """

    gamma: float = 0.8
    horizon: int = 10
    belief_points: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))
    perseus_subset: int | str = 1
    improvement_tol: float = 1e-6
    seed: int = 0
    renormalize: bool = True
    probability_floor: float = PROBABILITY_FLOOR

    def __post_init__(self) -> None:
        if not 0 < self.gamma < 1:
            raise ConfigError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.horizon < 1:
            raise ConfigError(f"horizon must be positive, got {self.horizon}")
        if self.perseus_subset != "all" and (
            not isinstance(self.perseus_subset, (int, np.integer)) or self.perseus_subset < 1
        ):
            raise ConfigError("perseus_subset must be a positive integer or 'all'")
        if self.improvement_tol <= 0 or self.probability_floor <= 0:
            raise ConfigError("improvement_tol and probability_floor must be positive")

        points = _as_points(self.belief_points)
        if points.size == 0:
            raise ConfigError("The planner needs at least one belief point")
        object.__setattr__(self, "belief_points", points)


@dataclass(frozen=True)
class PlanResult:
    """A value function and the log of the stages that produced it."""

    value_function: ValueFunction
    stages: list[dict]


def support_operators(model: TpsrModel, obs_support: np.ndarray | None = None) -> np.ndarray:
    """Compose the operators of every support observation, shape `(A, m, n, n)`."""

    if obs_support is None:
        return model.operators

    return compose_operators(model, obs_support)


def observation_likelihoods(
    model: TpsrModel,
    points: np.ndarray,
    obs_support: np.ndarray | None = None,
    floor: float = PROBABILITY_FLOOR,
) -> np.ndarray:
    """
    Clamped, renormalized likelihoods of the support observations.

    Returns
    -------
    numpy.ndarray
        `p(o | b, a)` with shape `(m, A, support)`, summing to one over
        the last axis.
    """

    operators = support_operators(model, obs_support)
    raw = np.einsum("ajnk,mk,n->maj", operators, _as_points(points), model.b_inf)
    clamped = np.maximum(raw, floor)

    return clamped / clamped.sum(axis=-1, keepdims=True)


def branch_states(
    model: TpsrModel, b: BeliefState | np.ndarray, obs_support: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """
    Filter one state through every action and support observation.

    Returns
    -------
    states : numpy.ndarray
        Normalized next states, shape `(A, support, n)`. Branches whose
        normalizer vanishes are filled with NaN.
    likelihoods : numpy.ndarray
        Raw normalizers `b_inf . B(a, o) . b`, shape `(A, support)`.
    """

    vector = b.vector if isinstance(b, BeliefState) else np.asarray(b, dtype=np.float64)
    unnormalized = support_operators(model, obs_support) @ vector
    likelihoods = unnormalized @ model.b_inf

    states = np.full_like(unnormalized, np.nan)
    usable = np.abs(likelihoods) >= DEGENERATE_TOL
    states[usable] = unnormalized[usable] / likelihoods[usable][:, None]

    return states, likelihoods


def _candidate_alphas(
    points: np.ndarray,
    gamma: float,
    vf: ValueFunction,
    operators: np.ndarray,
    b_inf: np.ndarray,
    reward: RewardModel,
    renormalize: bool,
    floor: float,
) -> np.ndarray:
    """
    Back up every action at every point, returning alphas `(m, A, n)`.

    The alpha of action `a` at `b` is
    `eta_a + gamma * sum_o c_o B(a, o)^T alpha*_o` where `alpha*_o`
    maximizes `alpha . B(a, o) b`. The coefficient `c_o` is one without
    renormalization; otherwise it is `p(o | b, a) / (b_inf . B(a, o) b)`
    and zero for branches below the floor.
    """

    num_actions, support, n, _ = operators.shape
    step = max(1, CHUNK_ENTRIES // (num_actions * support * max(len(vf), n)))

    candidates = np.empty((len(points), num_actions, n))
    for start in range(0, len(points), step):
        chunk = points[start : start + step]
        forward = np.einsum("ajnk,mk->majn", operators, chunk)
        best = np.argmax(forward @ vf.alphas.T, axis=-1)

        coefficients = np.ones(best.shape)
        if renormalize:
            raw = forward @ b_inf
            clamped = np.maximum(raw, floor)
            likelihoods = clamped / clamped.sum(axis=-1, keepdims=True)
            usable = raw >= floor
            coefficients = np.where(usable, likelihoods / np.where(usable, raw, 1.0), 0.0)

        future = np.einsum("maj,majn,ajnk->mak", coefficients, vf.alphas[best], operators)
        candidates[start : start + step] = reward.eta[None] + gamma * future

    return candidates


def _backup_points(
    points: np.ndarray,
    gamma: float,
    vf: ValueFunction,
    model: TpsrModel,
    reward: RewardModel,
    operators: np.ndarray,
    renormalize: bool,
    floor: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Best new alpha and its action at each point, keeping the old one if better."""

    candidates = _candidate_alphas(
        points, gamma, vf, operators, model.b_inf, reward, renormalize, floor
    )
    q_values = np.einsum("man,mn->ma", candidates, points)
    best_actions = np.argmax(q_values, axis=1)
    rows = np.arange(len(points))
    alphas = candidates[rows, best_actions]

    old_index = vf.best_index(points)
    worse = q_values[rows, best_actions] < vf.value(points)
    alphas[worse] = vf.alphas[old_index[worse]]
    best_actions[worse] = vf.actions[old_index[worse]]

    return alphas, best_actions


def _unique(alphas: np.ndarray, actions: np.ndarray) -> ValueFunction:
    """Drop repeated alpha-vectors, keeping first occurrences in order."""

    _, first = np.unique(alphas, axis=0, return_index=True)
    first = np.sort(first)

    return ValueFunction(alphas[first], actions[first])


def pbvi_backup(
    gamma: float,
    vf: ValueFunction,
    model: TpsrModel,
    rm: RewardModel,
    obs_support: np.ndarray | None,
    points: Sequence[BeliefState] | np.ndarray,
    renormalize: bool = True,
    floor: float = PROBABILITY_FLOOR,
) -> ValueFunction:
    """
    Back up a value function at every point.

    Parameters
    ----------
    gamma : float
        Discount factor.
    vf : ValueFunction
        Current value function.
    model : TpsrModel
        Model giving the dynamics.
    rm : RewardModel
        Linear reward model.
    obs_support : numpy.ndarray, optional
        Observation weight vectors summed over in the backup. By default
        the one-hot vector of every observation kernel.
    points : Sequence[BeliefState] or numpy.ndarray
        States to back up at.
    renormalize : bool
        Whether likelihoods are clamped and renormalized.
    floor : float
        Likelihood floor.

    Returns
    -------
    ValueFunction
        One alpha per point (repeats dropped): the best backed-up alpha,
        or the previous best where the backup would lower the value.
    """

    points = _as_points(points)
    operators = support_operators(model, obs_support)
    alphas, actions = _backup_points(points, gamma, vf, model, rm, operators, renormalize, floor)

    return _unique(alphas, actions)


def perseus_sweep(
    vf: ValueFunction,
    cfg: PlannerConfig,
    model: TpsrModel,
    rm: RewardModel,
    obs_support: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
) -> ValueFunction:
    """
    Run one Perseus stage.

    Points are drawn from the unimproved set and backed up against `vf`.
    A drawn point always leaves the unimproved set; any other point
    leaves it once its value under the new set strictly exceeds its old
    value. The stage ends when the set is empty.

    Parameters
    ----------
    vf : ValueFunction
        Value function at the start of the stage.
    cfg : PlannerConfig
        Planner settings, including the belief points.
    model : TpsrModel
        Model giving the dynamics.
    rm : RewardModel
        Linear reward model.
    obs_support : numpy.ndarray, optional
        Observation support, as in `pbvi_backup`.
    rng : numpy.random.Generator, optional
        Source of the point draws. Defaults to a generator seeded with
        `cfg.seed`.

    Returns
    -------
    ValueFunction
        Value function at the end of the stage.
    """

    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    points = cfg.belief_points
    operators = support_operators(model, obs_support)
    old_values = vf.value(points)

    new_alphas, new_actions = [], []
    unimproved = np.arange(len(points))
    while len(unimproved):
        if cfg.perseus_subset == "all":
            chosen = unimproved
        else:
            size = min(int(cfg.perseus_subset), len(unimproved))
            chosen = np.sort(rng.choice(unimproved, size=size, replace=False))

        alphas, actions = _backup_points(
            points[chosen],
            cfg.gamma,
            vf,
            model,
            rm,
            operators,
            cfg.renormalize,
            cfg.probability_floor,
        )
        new_alphas.append(alphas)
        new_actions.append(actions)

        current = ValueFunction(np.concatenate(new_alphas), np.concatenate(new_actions))
        improved = current.value(points[unimproved]) > old_values[unimproved]
        improved[np.isin(unimproved, chosen)] = True
        unimproved = unimproved[~improved]

    return _unique(np.concatenate(new_alphas), np.concatenate(new_actions))


def lower_bound_value(
    model: TpsrModel, reward: RewardModel, gamma: float, points: np.ndarray
) -> ValueFunction:
    """
    A constant lower bound on the value at the given points.

    No policy earns less than `r = min_a min_b eta_a . b` per step, so
    the single alpha `(r / (1 - gamma)) b_inf` lies below the optimal
    value at every normalized state the points represent.
    """

    bound = float(reward.expected(_as_points(points)).min()) / (1 - gamma)

    return ValueFunction.constant(bound * model.b_inf)


def perseus(
    model: TpsrModel,
    rm: RewardModel,
    cfg: PlannerConfig,
    obs_support: np.ndarray | None = None,
    initial: ValueFunction | None = None,
) -> PlanResult:
    """
    Run Perseus stages until values settle or the horizon is reached.

    Parameters
    ----------
    model : TpsrModel
        Model giving the dynamics.
    rm : RewardModel
        Linear reward model.
    cfg : PlannerConfig
        Planner settings.
    obs_support : numpy.ndarray, optional
        Observation support, as in `pbvi_backup`.
    initial : ValueFunction, optional
        Starting value function. Defaults to `lower_bound_value`.

    Returns
    -------
    PlanResult
        The final value function and one log entry per stage.
    """

    rng = np.random.default_rng(cfg.seed)
    points = cfg.belief_points
    vf = lower_bound_value(model, rm, cfg.gamma, points) if initial is None else initial

    stages = []
    values = vf.value(points)
    for stage in range(1, cfg.horizon + 1):
        vf = perseus_sweep(vf, cfg, model, rm, obs_support, rng)
        new_values = vf.value(points)
        improvement = float(np.max(new_values - values))
        values = new_values

        stages.append(
            {
                "stage": stage,
                "alphas": len(vf),
                "mean_value": float(values.mean()),
                "max_improvement": improvement,
            }
        )
        logging.info(
            f"Stage {stage}: {len(vf)} alphas, mean value {values.mean():.6g}, "
            f"max improvement {improvement:.3g}"
        )
        if improvement < cfg.improvement_tol:
            break

    return PlanResult(value_function=vf, stages=stages)


def q_values(
    model: TpsrModel,
    b: BeliefState | np.ndarray,
    vf: ValueFunction,
    rm: RewardModel,
    gamma: float,
    obs_support: np.ndarray | None = None,
    renormalize: bool = True,
    floor: float = PROBABILITY_FLOOR,
) -> np.ndarray:
    """
    One-step lookahead values of every action.

    `Q(a) = eta_a . b + gamma * sum_o p(o | b, a) V(b_ao)`, with branches
    the model judges impossible (likelihood below the floor) carrying no
    weight.
    """

    vector = b.vector if isinstance(b, BeliefState) else np.asarray(b, dtype=np.float64)
    operators = support_operators(model, obs_support)
    candidates = _candidate_alphas(
        vector[None], gamma, vf, operators, model.b_inf, rm, renormalize, floor
    )

    return candidates[0] @ vector


def greedy_action(
    model: TpsrModel,
    b: BeliefState | np.ndarray,
    vf: ValueFunction,
    rm: RewardModel,
    gamma: float,
    obs_support: np.ndarray | None = None,
    renormalize: bool = True,
    floor: float = PROBABILITY_FLOOR,
) -> int:
    """Return the action maximizing `q_values`, lowest index on ties."""

    return int(np.argmax(q_values(model, b, vf, rm, gamma, obs_support, renormalize, floor)))
