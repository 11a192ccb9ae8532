"""Unit tests for the `operators` module."""

import numpy as np
from hypothesis import given, settings

from strategies import st_seeds, st_transformed_models
from tpsr.envs.oracle import oracle_model
from tpsr.features.operators import compose_operator, compose_operators


@given(st_transformed_models(), st_seeds())
@settings(deadline=None)
def test_compose_operator_is_weighted_sum(pair, seed):
    """Test that an observation operator blends the base operators by weight."""

    _, model = pair
    weights = np.random.default_rng(seed).dirichlet(np.ones(model.num_kernels))

    for action in range(model.num_actions):
        expected = sum(w * model.operator(action, j) for j, w in enumerate(weights))
        assert np.allclose(compose_operator(model, action, weights), expected)


def test_compose_operator_one_hot_picks_base(three_state):
    """Test that a one-hot weight vector returns the base operator itself."""

    model = oracle_model(three_state)

    assert np.array_equal(compose_operator(model, 1, np.array([0.0, 1.0])), model.operator(1, 1))


@given(st_transformed_models(), st_seeds())
@settings(deadline=None)
def test_compose_operators_matches_single(pair, seed):
    """Test that batch composition agrees with composing one operator at a time."""

    _, model = pair
    support = np.random.default_rng(seed).dirichlet(np.ones(model.num_kernels), size=3)
    operators = compose_operators(model, support)

    assert operators.shape == (model.num_actions, 3, model.rank_n, model.rank_n)
    for action in range(model.num_actions):
        for row, weights in enumerate(support):
            assert np.allclose(operators[action, row], compose_operator(model, action, weights))
