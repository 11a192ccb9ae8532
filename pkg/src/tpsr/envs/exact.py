"""Exact oracles for small POMDPs: analytic moments and value iteration."""

import logging
from math import comb

import numpy as np

from tpsr.envs.oracle import enumerate_products
from tpsr.envs.pomdp import Pomdp
from tpsr.errors import SizeLimit
from tpsr.features.kernels import sequence_index
from tpsr.learning.estimates import EmpiricalEstimates
from tpsr.planning.value import ValueFunction

#: Largest POMDP the value-iteration oracle accepts.
MAX_STATES, MAX_OBS = 6, 4

#: Largest belief grid used for pruning.
MAX_GRID_POINTS = 250_000

#: Belief-grid points evaluated at a time.
GRID_CHUNK = 8192


def exact_estimates(p: Pomdp, past_len: int, future_len: int) -> EmpiricalEstimates:
    """
    Analytic moments of a POMDP under uniformly random actions.

    Windows start at the initial belief. Indicative features are
    indicators of the `past_len`-pair history, characteristic features
    indicators of a `future_len`-pair test (actions included) and the
    observation kernels are indicators of the pivot observation, so the
    result equals `accumulate_estimates` over every window weighted by
    its exact probability. The operator sums are raw (identity
    projection).

    Returns
    -------
    EmpiricalEstimates
        Estimates with total weight one.
    """

    scale = 1.0 / p.num_actions
    operators = p.observable_operators()

    # Columns are the scaled joint beliefs of every history
    alphas = enumerate_products(operators, p.initial_belief, past_len, scale).T
    test_rows = enumerate_products(operators, np.eye(p.num_states), future_len, scale).sum(axis=1)

    sum_h = alphas.sum(axis=0)
    sum_th = test_rows @ alphas
    sum_taoh = scale * np.einsum("ts,aosr,rh->aoth", test_rows, operators, alphas)

    return EmpiricalEstimates(
        sum_h=sum_h,
        sum_th=sum_th,
        action_weights=np.full(p.num_actions, scale),
        total_weight=1.0,
        sum_taoh=sum_taoh,
        projection=np.eye(len(test_rows)),
    )


def enumerate_windows(
    p: Pomdp, past_len: int, future_len: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Every window of `past_len + 1 + future_len` pairs with its probability.

    Returns
    -------
    actions : numpy.ndarray
        Window actions, shape `(K, span)`.
    observations : numpy.ndarray
        Window observation symbols, shape `(K, span, 1)`.
    probabilities : numpy.ndarray
        Probability of each window under uniformly random actions from
        the initial belief, shape `(K,)`.
    """

    span = past_len + 1 + future_len
    scale = 1.0 / p.num_actions
    joint = enumerate_products(p.observable_operators(), p.initial_belief, span, scale)

    pairs = p.num_actions * p.num_obs
    index = np.arange(len(joint))
    digits = np.stack([(index // pairs ** (span - 1 - s)) % pairs for s in range(span)], axis=1)
    actions, observations = digits // p.num_obs, digits % p.num_obs

    assert np.array_equal(sequence_index(observations, actions, p.num_obs, p.num_actions), index)

    return actions, observations[:, :, None].astype(np.float64), joint.sum(axis=1)


def belief_grid(num_states: int, step: float) -> np.ndarray:
    """Integer compositions scaled to beliefs."""

    resolution = int(round(1 / step))
    count = comb(resolution + num_states - 1, num_states - 1)
    if count > MAX_GRID_POINTS:
        raise SizeLimit(
            f"A belief grid with step {step} over {num_states} states has {count} points"
        )

    compositions = np.zeros((1, 0), dtype=np.int64)
    remaining = np.array([resolution])
    for _ in range(num_states - 1):
        parts = [np.arange(r + 1) for r in remaining]
        repeats = np.array([len(part) for part in parts])
        compositions = np.column_stack(
            [np.repeat(compositions, repeats, axis=0), np.concatenate(parts)]
        )
        remaining = np.repeat(remaining, repeats) - compositions[:, -1]
    compositions = np.column_stack([compositions, remaining])

    return compositions / resolution


def upper_envelope(alphas: np.ndarray) -> np.ndarray:
    """
    Indices of the lines attaining the maximum somewhere on a 2-state simplex.

    A belief `(1 - x, x)` gives alpha the value `alpha_0 + (alpha_1 -
    alpha_0) x`, so the envelope over `x in [0, 1]` is an upper hull of
    lines.
    """

    intercepts = alphas[:, 0]
    slopes = alphas[:, 1] - alphas[:, 0]
    order = np.lexsort((-intercepts, slopes))

    hull: list[int] = []
    for i in order:
        if hull and np.isclose(slopes[hull[-1]], slopes[i], rtol=0, atol=1e-14):
            continue
        while len(hull) >= 2:
            j, k = hull[-2], hull[-1]
            # Line k is never strictly on top if i overtakes j no later than k does
            cross_ji = (intercepts[j] - intercepts[i]) / (slopes[i] - slopes[j])
            cross_jk = (intercepts[j] - intercepts[k]) / (slopes[k] - slopes[j])
            if cross_ji <= cross_jk:
                hull.pop()
            else:
                break
        hull.append(i)

    keep = []
    for position, i in enumerate(hull):
        lower = -np.inf
        upper = np.inf
        if position > 0:
            j = hull[position - 1]
            lower = (intercepts[j] - intercepts[i]) / (slopes[i] - slopes[j])
        if position + 1 < len(hull):
            k = hull[position + 1]
            upper = (intercepts[i] - intercepts[k]) / (slopes[k] - slopes[i])
        if max(lower, 0.0) <= min(upper, 1.0):
            keep.append(i)

    return np.array(sorted(keep), dtype=np.int64)


def grid_prune(alphas: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Indices of the alphas maximizing the value at some grid belief."""

    winners = set()
    for start in range(0, len(grid), GRID_CHUNK):
        values = grid[start : start + GRID_CHUNK] @ alphas.T
        winners.update(np.unique(np.argmax(values, axis=1)).tolist())

    return np.array(sorted(winners), dtype=np.int64)


def pruner(num_states: int, grid_step: float):
    """Choose the pruning rule for a belief simplex of the given size."""

    if num_states == 1:
        return lambda alphas: np.argmax(alphas, axis=0)
    if num_states == 2:
        return upper_envelope

    grid = belief_grid(num_states, grid_step)

    return lambda alphas: grid_prune(alphas, grid)


def exact_value_iteration(
    p: Pomdp, gamma: float, horizon: int, initial: float = 0.0, grid_step: float = 0.01
) -> ValueFunction:
    """
    Value iteration over the full belief simplex.

    Each stage forms the cross-sums of the backed-up alphas one
    observation at a time, pruning after every sum. With two states
    pruning keeps exactly the upper envelope; otherwise it keeps the
    alphas that win at some belief of a grid with the given step.

    Parameters
    ----------
    p : Pomdp
        The POMDP.
    gamma : float
        Discount factor.
    horizon : int
        Number of backups.
    initial : float
        Constant value of the starting set `{initial * 1}`.
    grid_step : float
        Spacing of the pruning grid.

    Returns
    -------
    ValueFunction
        Alphas over beliefs tagged with their first action.

    Raises
    ------
    SizeLimit
        If the POMDP or its pruning grid is too large.
    """

    if p.num_states > MAX_STATES or p.num_obs > MAX_OBS:
        raise SizeLimit(
            f"Exact value iteration handles at most {MAX_STATES} states and {MAX_OBS} "
            f"observations, got {p.num_states} and {p.num_obs}"
        )

    prune = pruner(p.num_states, grid_step)

    operators = p.observable_operators()
    alphas = np.full((1, p.num_states), float(initial))
    tags = np.zeros(1, dtype=np.int64)

    for stage in range(horizon):
        stage_alphas, stage_tags = [], []
        for action in range(p.num_actions):
            # alpha . M_ao b  =  (M_ao^T alpha) . b
            projected = gamma * np.einsum("ks,ost->okt", alphas, operators[action])
            sums = p.reward[:, action][None, :] + projected[0]
            sums = sums[prune(sums)]
            for obs in range(1, p.num_obs):
                sums = (sums[:, None, :] + projected[obs][None, :, :]).reshape(-1, p.num_states)
                sums = sums[prune(sums)]
            stage_alphas.append(sums)
            stage_tags.append(np.full(len(sums), action))

        alphas = np.concatenate(stage_alphas)
        tags = np.concatenate(stage_tags)
        kept = prune(alphas)
        alphas, tags = alphas[kept], tags[kept]
        logging.debug(f"Exact backup {stage + 1}: {len(alphas)} alphas")

    return ValueFunction(alphas, tags)
