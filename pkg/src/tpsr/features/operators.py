"""Observable operators composed from base operators."""

from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from tpsr.model.tpsr import TpsrModel


def compose_operator(model: "TpsrModel", action: int, obs_weights: np.ndarray) -> np.ndarray:
    """Build the operator of an observation from its kernel weights.

    One base operator is learned per observation kernel; the operator
    of any observation is the combination of the base operators of the
    action, weighted by the observation's normalized kernel weights.

    Parameters
    ----------
    model : TpsrModel
        Model holding the base operators.
    action : int
        Index of the action.
    obs_weights : numpy.ndarray
        Weight vector with one entry per observation kernel.

    Returns
    -------
    numpy.ndarray
        The `n x n` operator `sum_j obs_weights[j] * B_{a,j}`.
    """

    obs_weights = np.asarray(obs_weights, dtype=np.float64)
    assert obs_weights.shape == (model.num_kernels,), (
        f"Expected {model.num_kernels} kernel weights, got {obs_weights.shape}"
    )

    return np.tensordot(obs_weights, model.operators[action], axes=1)


def compose_operators(model: "TpsrModel", obs_support: np.ndarray) -> np.ndarray:
    """Compose the operators of every action for a set of observations.

    Parameters
    ----------
    model : TpsrModel
        Model holding the base operators.
    obs_support : numpy.ndarray
        Weight vectors, one per row, shape `(m, num_kernels)`.

    Returns
    -------
    numpy.ndarray
        Operators with shape `(num_actions, m, n, n)`.
    """

    obs_support = np.asarray(obs_support, dtype=np.float64)
    assert obs_support.ndim == 2 and obs_support.shape[1] == model.num_kernels

    return np.einsum("oj,ajnm->aonm", obs_support, model.operators)
