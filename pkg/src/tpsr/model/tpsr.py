"""Transformed PSR models and exact state filtering.

A `TpsrModel` holds the parameters `(b1, b_inf, B_{a,j}, U)` of a
transformed predictive state representation. Observations enter through
normalized weight vectors over the observation kernels: the operator
for a raw observation is the weight-combination of the base operators
of its action, so discrete systems (one-hot weights) and continuous
systems (kernel weights) share one code path.

Every function here is pure. Raw linear algebra is never clamped;
`clamp_probability` is applied only where a probability is consumed.
"""

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from tpsr.errors import DegenerateUpdate
from tpsr.features.operators import compose_operator

#: Smallest magnitude of `b_inf . B(a, o) . b` accepted by `filter_update`.
DEGENERATE_TOL = 1e-12

#: Default floor applied where probabilities are consumed.
PROBABILITY_FLOOR = 1e-9


def _frozen(array: np.ndarray | Sequence, ndim: int, name: str) -> np.ndarray:
    """Return a read-only float64 copy of `array` with the expected rank."""

    out = np.array(array, dtype=np.float64)
    assert out.ndim == ndim, f"{name} must have {ndim} dimensions, got {out.ndim}"
    assert np.all(np.isfinite(out)), f"{name} has non-finite entries"
    out.setflags(write=False)

    return out


@dataclass(frozen=True)
class TpsrModel:
    """Learned parameters of a transformed PSR.

    Parameters
    ----------
    b1 : numpy.ndarray
        Initial state, length `n`.
    b_inf : numpy.ndarray
        Normalizer, length `n`.
    operators : numpy.ndarray
        Base operators with shape `(num_actions, num_kernels, n, n)`;
        `operators[a, j]` is `B_{a,j}`.
    projection_u : numpy.ndarray
        Projection `U` with shape `(feature_dim, n)`.
    actions : tuple[str, ...], optional
        Labels of the actions, in index order. Defaults to the indices.
    feature_map_ref : str, optional
        Checksum of the feature map the model was trained with.

    Notes
    -----
    Instances are immutable: arrays are copied and flagged read-only,
    so a model can be shared between concurrent readers.
    """

    b1: np.ndarray
    b_inf: np.ndarray
    operators: np.ndarray
    projection_u: np.ndarray
    actions: tuple[str, ...] = field(default=())
    feature_map_ref: str = ""

    def __post_init__(self) -> None:
        b1 = _frozen(self.b1, 1, "b1")
        b_inf = _frozen(self.b_inf, 1, "b_inf")
        operators = _frozen(self.operators, 4, "operators")
        projection_u = _frozen(self.projection_u, 2, "projection_u")

        n = len(b1)
        assert n >= 1, "A model needs at least one state dimension"
        assert len(b_inf) == n, "b_inf and b1 lengths differ"
        assert operators.shape[2:] == (n, n), "operators must be n x n"
        assert projection_u.shape[1] == n, "projection_u must have n columns"

        actions = tuple(self.actions) or tuple(str(a) for a in range(operators.shape[0]))
        assert len(actions) == operators.shape[0], "One label per action is required"

        object.__setattr__(self, "b1", b1)
        object.__setattr__(self, "b_inf", b_inf)
        object.__setattr__(self, "operators", operators)
        object.__setattr__(self, "projection_u", projection_u)
        object.__setattr__(self, "actions", actions)

    @property
    def rank_n(self) -> int:
        """Dimension of the state."""
        return len(self.b1)

    @property
    def num_actions(self) -> int:
        """Number of actions."""
        return self.operators.shape[0]

    @property
    def num_kernels(self) -> int:
        """Number of observation kernels (base operators per action)."""
        return self.operators.shape[1]

    @property
    def feature_dim(self) -> int:
        """Dimension of the characteristic features."""
        return self.projection_u.shape[0]

    def operator(self, action: int, kernel: int) -> np.ndarray:
        """Return the base operator `B_{a,j}`."""
        return self.operators[action, kernel]

    def initial_state(self) -> "BeliefState":
        """Return the normalized initial state `b1 / (b_inf . b1)`."""
        return BeliefState(self.b1 / float(self.b_inf @ self.b1), 0)


@dataclass(frozen=True)
class BeliefState:
    """The normalized internal state of a TPSR.

    Parameters
    ----------
    vector : numpy.ndarray
        State vector of length `n`.
    step_index : int
        Number of updates applied since the initial state.
    """

    vector: np.ndarray
    step_index: int = 0

    def __post_init__(self) -> None:
        vector = np.array(self.vector, dtype=np.float64)
        assert vector.ndim == 1, "A belief state is a vector"
        assert self.step_index >= 0, "step_index must be nonnegative"
        vector.setflags(write=False)
        object.__setattr__(self, "vector", vector)


def clamp_probability(p: float, floor: float = PROBABILITY_FLOOR) -> float:
    """Clamp a predicted probability from below.

    Sampled models can predict small negative probabilities; where a
    probability is consumed (division, logarithms, planner
    likelihoods) it is floored to a small positive value.

    Parameters
    ----------
    p : float
        Predicted probability.
    floor : float
        Positive lower bound. Default is `1e-9`.

    Returns
    -------
    float
        `max(p, floor)`.
    """

    assert floor > 0, "floor must be positive"

    return max(float(p), floor)


def filter_update(
    model: TpsrModel, b: BeliefState, action: int, obs_weights: np.ndarray
) -> BeliefState:
    """Update a state with one action and observation.

    Parameters
    ----------
    model : TpsrModel
        Model to filter with.
    b : BeliefState
        Current state.
    action : int
        Index of the action taken.
    obs_weights : numpy.ndarray
        Normalized kernel weights of the observation received.

    Returns
    -------
    BeliefState
        `B(a, o) b / (b_inf . B(a, o) b)` with the step index advanced.

    Raises
    ------
    DegenerateUpdate
        If `|b_inf . B(a, o) b| < 1e-12`.
    """

    obs_weights = np.asarray(obs_weights, dtype=np.float64)
    assert abs(obs_weights.sum() - 1.0) <= 1e-9, "obs_weights must sum to one"
    assert np.all(np.isfinite(b.vector)), "State has non-finite entries"

    unnormalized = compose_operator(model, action, obs_weights) @ b.vector
    denominator = float(model.b_inf @ unnormalized)
    if abs(denominator) < DEGENERATE_TOL:
        raise DegenerateUpdate(denominator)

    return BeliefState(unnormalized / denominator, b.step_index + 1)


def filter_sequence(
    model: TpsrModel,
    actions: Sequence[int],
    obs_weight_seq: Sequence[np.ndarray],
    start: BeliefState | None = None,
) -> BeliefState:
    """Fold `filter_update` over a sequence, from `start` or the initial state."""

    b = model.initial_state() if start is None else start
    for action, weights in zip(actions, obs_weight_seq, strict=True):
        b = filter_update(model, b, action, weights)

    return b


def sequence_probability(
    model: TpsrModel, actions: Sequence[int], obs_weight_seq: Sequence[np.ndarray]
) -> float:
    """Compute the probability of observations given interventions.

    Parameters
    ----------
    model : TpsrModel
        Model to evaluate.
    actions : Sequence[int]
        Actions `a_1, ..., a_t`.
    obs_weight_seq : Sequence[numpy.ndarray]
        Kernel weights of the observations `o_1, ..., o_t`.

    Returns
    -------
    float
        `b_inf . B(a_t, o_t) ... B(a_1, o_1) . b1`, which is `b_inf . b1`
        for an empty sequence. Sampled models may return small negative
        values.
    """

    assert len(actions) == len(obs_weight_seq), "Sequences must have the same length"

    state = model.b1
    for action, weights in zip(actions, obs_weight_seq):
        state = compose_operator(model, action, np.asarray(weights, dtype=np.float64)) @ state

    return float(model.b_inf @ state)


def predict_tests(model: TpsrModel, b: BeliefState) -> np.ndarray:
    """Return the characteristic-feature expectations `U b`."""

    assert np.all(np.isfinite(b.vector)), "State has non-finite entries"

    return model.projection_u @ b.vector


def similarity_transform(model: TpsrModel, transform: np.ndarray) -> TpsrModel:
    """Apply an invertible change of basis `J` to a model.

    The result `(J b1, J^-T b_inf, J B J^-1)` assigns the same
    probability to every sequence as `model`; the projection becomes
    `U J^-1` so that test predictions are unchanged too.
    """

    transform = np.asarray(transform, dtype=np.float64)
    inverse = np.linalg.inv(transform)

    return TpsrModel(
        b1=transform @ model.b1,
        b_inf=inverse.T @ model.b_inf,
        operators=np.einsum("ij,akjl,lm->akim", transform, model.operators, inverse),
        projection_u=model.projection_u @ inverse,
        actions=model.actions,
        feature_map_ref=model.feature_map_ref,
    )
