"""Unit tests for the `pomdp` module."""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from strategies import st_beliefs, st_pomdps
from tpsr.envs.pomdp import (
    Pomdp,
    forward_probability,
    forward_probability_table,
    history_state,
    pomdp_sample,
    read_pomdp,
    sample_trajectories,
    tiger_pomdp,
    write_pomdp,
)
from tpsr.errors import FormatError, ValidationError


@pytest.mark.parametrize(
    "changes",
    (
        {"transition": np.full((1, 2, 2), 0.6)},
        {"emission": np.full((1, 2, 2), -0.5)},
        {"initial_belief": np.array([0.5, 0.5, 0.0])},
        {"reward": np.zeros((1, 2))},
        {"transition": np.ones((1, 2, 3)) / 3},
    ),
)
def test_pomdp_validation(changes):
    """Test that malformed tables are rejected."""

    tables = {
        "transition": np.full((1, 2, 2), 0.5),
        "emission": np.full((1, 2, 2), 0.5),
        "initial_belief": np.array([0.5, 0.5]),
        "reward": np.zeros((2, 1)),
        **changes,
    }

    with pytest.raises(ValidationError):
        Pomdp(**tables)


def test_observable_operators(three_state):
    """Test the operator convention `M_ao = diag(O_a[:, o]) T_a^T`."""

    operators = three_state.observable_operators()

    for a, o in itertools.product(range(2), range(2)):
        expected = np.diag(three_state.emission[a][:, o]) @ three_state.transition[a].T
        assert np.allclose(operators[a, o], expected)


@given(st_pomdps(), st.integers(0, 3))
@settings(deadline=None)
def test_total_probability(p, length):
    """Test that observation sequences of a fixed action sequence sum to one."""

    table = forward_probability_table(p, length)
    actions = [f"action_{s + 1}" for s in range(length)]

    if length:
        totals = table.groupby(actions)["probability"].sum()
        assert np.allclose(totals, 1.0)
        assert len(totals) == p.num_actions**length
    else:
        assert np.isclose(table["probability"].item(), 1.0)


@given(st_pomdps(), st.data())
@settings(deadline=None)
def test_forward_probability_agrees_with_table(p, data):
    """Test single-sequence probabilities against the enumerated table."""

    belief = data.draw(st_beliefs(p.num_states))
    table = forward_probability_table(p, 2, belief)
    row = data.draw(st.integers(0, len(table) - 1))

    actions = table.loc[row, ["action_1", "action_2"]].astype(int).tolist()
    observations = table.loc[row, ["obs_1", "obs_2"]].astype(int).tolist()

    assert np.isclose(
        forward_probability(p, actions, observations, belief), table.loc[row, "probability"]
    )


def test_forward_probability_accepts_numeric_indices(three_state):
    """Test that indices read back as floats address the same sequence."""

    as_int = forward_probability(three_state, [1, 0], [0, 1])
    as_float = forward_probability(three_state, np.array([1.0, 0.0]), [0.0, 1.0])

    assert as_float == as_int


def test_empty_sequence(three_state):
    """Test that the empty sequence is certain."""

    assert forward_probability(three_state, [], []) == pytest.approx(1.0)


def test_history_state(three_state):
    """Test the state distribution after random steps."""

    mixed = 0.5 * (three_state.transition[0] + three_state.transition[1])

    assert np.allclose(history_state(three_state, 0), three_state.initial_belief)
    assert np.allclose(history_state(three_state, 2), mixed.T @ mixed.T @ [0.5, 0.3, 0.2])


def test_sampling_matches_probabilities(three_state):
    """Test that sampled one-step frequencies match the forward algorithm."""

    trajectories = sample_trajectories(three_state, 40000, 1, seed=11)
    pairs = np.array([(t.actions[0], int(t.observations[0, 0])) for t in trajectories])

    for a, o in itertools.product(range(2), range(2)):
        frequency = np.mean((pairs[:, 0] == a) & (pairs[:, 1] == o))
        expected = 0.5 * forward_probability(three_state, [a], [o])
        assert frequency == pytest.approx(expected, abs=0.01)


def test_sampling_is_reproducible(three_state):
    """Test that a seed fixes the samples and rewards follow the states."""

    first = sample_trajectories(three_state, 5, 6, seed=(3, 1))
    second = sample_trajectories(three_state, 5, 6, seed=(3, 1))

    for a, b in zip(first, second):
        assert np.array_equal(a.actions, b.actions)
        assert np.array_equal(a.observations, b.observations)
        assert set(a.rewards) <= set(three_state.reward.ravel())

    single = pomdp_sample(three_state, np.array([1.0, 0.0]), 4, 0)
    assert single.actions.tolist() == [0, 0, 0, 0]


def test_tiger_rewards():
    """Test the tiger's rewards and its reset on opening a door."""

    tiger = tiger_pomdp()

    assert tiger.reward.tolist() == [[-1.0, -100.0, 10.0], [-1.0, 10.0, -100.0]]
    assert np.allclose(tiger.transition[1], 0.5)
    assert np.allclose(tiger.emission[2], 0.5)


def test_pomdp_file_round_trip(tmp_path):
    """Test that a written POMDP reads back identically."""

    p = tiger_pomdp(listen_accuracy=0.7)
    path = tmp_path / "tiger.pomdp"
    write_pomdp(p, path)

    restored = read_pomdp(path)

    for name in ("transition", "emission", "initial_belief", "reward"):
        assert np.array_equal(getattr(restored, name), getattr(p, name))


def test_read_pomdp_ignores_comments(tmp_path):
    """Test that comment lines are skipped."""

    path = tmp_path / "coin.pomdp"
    path.write_text("# a coin\nPOMDP v1 1 1 2\n\n1\n\n1\n\n0.3 0.7\n# rewards\n0\n")

    p = read_pomdp(path)

    assert np.allclose(p.emission, [[[0.3, 0.7]]])


@pytest.mark.parametrize(
    "text, message",
    (
        ("", "header"),
        ("POMDP v2 1 1 2\n1\n1\n0.3 0.7\n0\n", "header"),
        ("POMDP v1 1 1 x\n", "integers"),
        ("POMDP v1 1 1 2\n1\n1\n0.3 0.7\n", "rows"),
        ("POMDP v1 1 1 2\n1\n1\n0.3\n0\n", "numbers"),
        ("POMDP v1 1 1 2\n1\n1\n0.3 abc\n0\n", "abc"),
    ),
)
def test_read_pomdp_errors(tmp_path, text, message):
    """Test that malformed files name the problem."""

    path = tmp_path / "bad.pomdp"
    path.write_text(text)

    with pytest.raises(FormatError, match=message):
        read_pomdp(path)


def test_read_pomdp_not_stochastic(tmp_path):
    """Test that a well-formed file with bad probabilities fails validation."""

    path = tmp_path / "bad.pomdp"
    path.write_text("POMDP v1 1 1 2\n1\n1\n0.3 0.8\n0\n")

    with pytest.raises(ValidationError):
        read_pomdp(path)
