"""Exact PSR forms of discrete POMDPs."""

from dataclasses import dataclass

import numpy as np

from tpsr.envs.pomdp import Pomdp
from tpsr.model.tpsr import TpsrModel
from tpsr.planning.reward import RewardModel


@dataclass(frozen=True)
class OraclePsr:
    """
    A linear PSR in the belief basis of a POMDP.

    Parameters
    ----------
    operators : numpy.ndarray
        `M_ao`, shape `(A, O, S, S)`.
    m1 : numpy.ndarray
        Initial state (the initial belief).
    m_inf : numpy.ndarray
        Normalizer (all ones).
    tests : numpy.ndarray
        Test-coefficient matrix `R`: row `tau` maps a belief to the
        probability of test `tau` under intervention, shape `(d_T, S)`.
    histories : numpy.ndarray
        History-prediction matrix `S`: column `h` is the normalized belief
        after history `h` (zero for impossible histories), shape `(S, d_H)`.
    """

    operators: np.ndarray
    m1: np.ndarray
    m_inf: np.ndarray
    tests: np.ndarray
    histories: np.ndarray

    def probability(self, actions, observations) -> float:
        """Probability of a sequence from `m1`."""

        state = self.m1
        for action, obs in zip(actions, observations):
            state = self.operators[action, obs] @ state

        return float(self.m_inf @ state)


def enumerate_products(operators: np.ndarray, start: np.ndarray, length: int, scale=1.0):
    """
    Apply every operator sequence of a given length to a start array.

    Sequences are indexed in mixed radix over the flattened pair index,
    first step most significant; each operator is multiplied by `scale`.

    Parameters
    ----------
    operators : numpy.ndarray
        Operators, shape `(A, O, S, S)`.
    start : numpy.ndarray
        Vector `(S,)` or matrix `(S, k)` to apply the products to.
    length : int
        Sequence length.
    scale : float
        Factor applied at every step.

    Returns
    -------
    numpy.ndarray
        Products applied to `start`, shape `((A O)^length, *start.shape)`.
    """

    pairs = operators.shape[0] * operators.shape[1]
    flat = scale * operators.reshape(pairs, *operators.shape[2:])

    products = np.asarray(start, dtype=np.float64)[None]
    for _ in range(length):
        products = np.einsum("pst,kt...->kps...", flat, products)
        products = products.reshape(-1, *start.shape)

    return products


def pomdp_to_psr(p: Pomdp, past_len: int = 1, future_len: int = 1) -> OraclePsr:
    """
    Express a POMDP as a linear PSR over its beliefs.

    Tests are the action-observation sequences of `future_len` pairs and
    histories those of `past_len` pairs, both in sequence-index order.
    """

    operators = p.observable_operators()
    num_states = p.num_states

    tests = enumerate_products(operators, np.eye(num_states), future_len).sum(axis=1)
    unnormalized = enumerate_products(operators, p.initial_belief, past_len)
    totals = unnormalized.sum(axis=1)
    possible = totals > 0
    histories = np.zeros_like(unnormalized)
    histories[possible] = unnormalized[possible] / totals[possible, None]

    return OraclePsr(
        operators=operators,
        m1=p.initial_belief.copy(),
        m_inf=np.ones(num_states),
        tests=tests,
        histories=histories.T,
    )


def oracle_model(p: Pomdp, future_len: int = 1, belief: np.ndarray | None = None) -> TpsrModel:
    """
    The exact model of a POMDP as a `TpsrModel`.

    The state is the belief, the operators are `M_ao` (one kernel per
    observation symbol) and `predict_tests` returns the interventional
    probabilities of every test of `future_len` pairs.

    Parameters
    ----------
    p : Pomdp
        The POMDP.
    future_len : int
        Length of the tests read out by `predict_tests`.
    belief : numpy.ndarray, optional
        Initial state. Defaults to the POMDP's initial belief.
    """

    psr = pomdp_to_psr(p, past_len=0, future_len=future_len)

    return TpsrModel(
        b1=psr.m1 if belief is None else belief,
        b_inf=psr.m_inf,
        operators=psr.operators,
        projection_u=psr.tests,
    )


def oracle_reward(p: Pomdp) -> RewardModel:
    """The POMDP's rewards as a linear reward model over beliefs."""
    return RewardModel(p.reward.T)

