"""Empirical moment estimates accumulated from training samples.

Estimates are stored as weighted sums together with the weights, so
partial estimates built from disjoint sample sets merge by addition.
The moment matrices themselves are derived on demand:

* `p_h = sum_h / w` estimates the indicative-feature means,
* `p_th = sum_th / w` estimates the test/history moments,
* `proj_p_taoh = sum_taoh / w_a` estimates `U^T P_{T,ao,H}` for every
  action `a` and observation kernel `j`.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator

import numpy as np

from tpsr.errors import EmptyOutput, MissingAction, ValidationError

#: Samples per chunk when accumulating the projected sums.
CHUNK_SIZE = 2048


@dataclass(frozen=True)
class TrainingSample:
    """
    The realized features of one window.

    Parameters
    ----------
    indicative_features : numpy.ndarray
        Features of the past window.
    characteristic_features : numpy.ndarray
        Features of the test starting at the pivot step.
    next_characteristic_features : numpy.ndarray
        Features of the test starting right after the pivot step.
    middle_action : int
        Action taken at the pivot step.
    middle_obs_weights : numpy.ndarray
        Normalized kernel weights of the pivot observation.
    weight : float
        Nonnegative sample weight. Default is one.
    """

    indicative_features: np.ndarray
    characteristic_features: np.ndarray
    next_characteristic_features: np.ndarray
    middle_action: int
    middle_obs_weights: np.ndarray
    weight: float = 1.0


@dataclass(frozen=True)
class SampleBatch:
    """
    Training samples stacked along a leading axis.

    Attributes mirror `TrainingSample`, with one row per sample.
    """

    indicative_features: np.ndarray
    characteristic_features: np.ndarray
    next_characteristic_features: np.ndarray
    middle_actions: np.ndarray
    middle_obs_weights: np.ndarray
    weights: np.ndarray = field(default=None)

    def __post_init__(self) -> None:
        size = len(self.middle_actions)
        if self.weights is None:
            object.__setattr__(self, "weights", np.ones(size))
        object.__setattr__(self, "middle_actions", np.asarray(self.middle_actions, dtype=np.int64))

        for name in (
            "indicative_features",
            "characteristic_features",
            "next_characteristic_features",
            "middle_obs_weights",
            "weights",
        ):
            value = np.asarray(getattr(self, name), dtype=np.float64)
            assert len(value) == size, f"{name} has {len(value)} rows; expected {size}"
            object.__setattr__(self, name, value)

        assert np.all(self.weights >= 0), "Sample weights must be nonnegative"

    def __len__(self) -> int:
        return len(self.middle_actions)

    @classmethod
    def from_samples(cls, samples: Iterable[TrainingSample]) -> "SampleBatch":
        """Stack individual samples into a batch."""

        samples = list(samples)
        if not samples:
            raise EmptyOutput("Cannot stack an empty list of samples")

        return cls(
            indicative_features=np.stack([s.indicative_features for s in samples]),
            characteristic_features=np.stack([s.characteristic_features for s in samples]),
            next_characteristic_features=np.stack(
                [s.next_characteristic_features for s in samples]
            ),
            middle_actions=np.array([s.middle_action for s in samples]),
            middle_obs_weights=np.stack([s.middle_obs_weights for s in samples]),
            weights=np.array([s.weight for s in samples], dtype=np.float64),
        )

    def samples(self) -> Iterator[TrainingSample]:
        """Iterate over the individual samples of the batch."""

        for i in range(len(self)):
            yield TrainingSample(
                self.indicative_features[i],
                self.characteristic_features[i],
                self.next_characteristic_features[i],
                int(self.middle_actions[i]),
                self.middle_obs_weights[i],
                float(self.weights[i]),
            )


@dataclass(frozen=True)
class EmpiricalEstimates:
    """
    Weighted moment sums of a set of training samples.

    Parameters
    ----------
    sum_h : numpy.ndarray
        Weighted sum of indicative features, length `d_H`.
    sum_th : numpy.ndarray
        Weighted sum of characteristic/indicative outer products,
        shape `(d_T, d_H)`.
    action_weights : numpy.ndarray
        Total sample weight per action, `w_a`.
    total_weight : float
        Total sample weight, `w`.
    sum_taoh : numpy.ndarray, optional
        Weighted sums of `(U^T phi_next) (phi_H)^T obs_weight_j` per
        action and kernel, shape `(A, J, n, d_H)`. Present after the
        second pass only.
    projection : numpy.ndarray, optional
        The projection `U` used for `sum_taoh`, shape `(d_T, n)`.
    """

    sum_h: np.ndarray
    sum_th: np.ndarray
    action_weights: np.ndarray
    total_weight: float
    sum_taoh: np.ndarray | None = None
    projection: np.ndarray | None = None

    def __post_init__(self) -> None:
        assert self.total_weight > 0, "Estimates need a positive total weight"
        assert abs(self.action_weights.sum() - self.total_weight) <= 1e-9 * self.total_weight
        assert (self.sum_taoh is None) == (self.projection is None)

    @property
    def num_actions(self) -> int:
        """Number of actions."""
        return len(self.action_weights)

    @property
    def raw_counts(self) -> np.ndarray:
        """Per-action sample weights `w_a`."""
        return self.action_weights

    @property
    def total_samples(self) -> float:
        """Total sample weight `w`."""
        return self.total_weight

    @property
    def p_h(self) -> np.ndarray:
        """Estimate of the indicative-feature means."""
        return self.sum_h / self.total_weight

    @property
    def p_th(self) -> np.ndarray:
        """Estimate of the test/history moment matrix."""
        return self.sum_th / self.total_weight

    @property
    def proj_p_taoh(self) -> np.ndarray:
        """Estimates of the projected operator moments, shape `(A, J, n, d_H)`."""

        assert self.sum_taoh is not None, "Projected moments need a second pass"

        return self.sum_taoh / self.action_weights[:, None, None, None]

    def project(self, projection: np.ndarray) -> "EmpiricalEstimates":
        """
        Project raw operator sums onto a new basis.

        Only estimates accumulated with the identity projection carry the
        raw sums `P_{T,ao,H}`; projecting them by `U` gives the same
        result as a second pass with `U`.
        """

        identity = self.projection is not None and np.array_equal(
            self.projection, np.eye(len(self.projection))
        )
        if not identity:
            raise ValidationError("Only estimates with raw operator sums can be projected")

        projection = np.asarray(projection, dtype=np.float64)

        return replace(
            self,
            sum_taoh=np.einsum("tn,ajth->ajnh", projection, self.sum_taoh),
            projection=projection,
        )


def accumulate_estimates(
    samples: Iterable[TrainingSample | SampleBatch],
    num_actions: int,
    projection: np.ndarray | None = None,
) -> EmpiricalEstimates:
    """
    Accumulate moment sums over a stream of samples.

    Without a projection this is the first pass: only `p_h`, `p_th` and
    the per-action weights are built. With a projection `U`, the second
    pass also accumulates the projected operator sums; passing the
    identity gives the raw sums.

    Parameters
    ----------
    samples : Iterable[TrainingSample or SampleBatch]
        Samples to accumulate, singly or in batches.
    num_actions : int
        Size of the action set.
    projection : numpy.ndarray, optional
        Projection `U`, shape `(d_T, n)`.

    Returns
    -------
    estimates : EmpiricalEstimates
        The accumulated sums.

    Raises
    ------
    EmptyOutput
        If there are no samples with positive weight.
    MissingAction
        If some action has no samples.
    """

    sum_h = sum_th = sum_taoh = None
    action_weights = np.zeros(num_actions)
    singles: list[TrainingSample] = []

    def batches() -> Iterator[SampleBatch]:
        for item in samples:
            if isinstance(item, SampleBatch):
                if singles:
                    yield SampleBatch.from_samples(singles)
                    singles.clear()
                yield item
            else:
                singles.append(item)
                if len(singles) == CHUNK_SIZE:
                    yield SampleBatch.from_samples(singles)
                    singles.clear()
        if singles:
            yield SampleBatch.from_samples(singles)

    for batch in batches():
        weights = batch.weights
        weighted_h = batch.indicative_features * weights[:, None]
        if sum_h is None:
            sum_h = np.zeros(batch.indicative_features.shape[1])
            sum_th = np.zeros(
                (batch.characteristic_features.shape[1], batch.indicative_features.shape[1])
            )
            if projection is not None:
                sum_taoh = np.zeros(
                    (
                        num_actions,
                        batch.middle_obs_weights.shape[1],
                        projection.shape[1],
                        batch.indicative_features.shape[1],
                    )
                )

        sum_h += weighted_h.sum(axis=0)
        sum_th += batch.characteristic_features.T @ weighted_h
        action_weights += np.bincount(batch.middle_actions, weights, minlength=num_actions)

        if projection is not None:
            _accumulate_projected(sum_taoh, batch, weighted_h, projection)

    if sum_h is None or action_weights.sum() <= 0:
        raise EmptyOutput("No samples with positive weight to accumulate")

    missing = np.flatnonzero(action_weights <= 0)
    if len(missing):
        raise MissingAction(missing.tolist())

    logging.debug(
        f"Accumulated total weight {action_weights.sum():.6g} "
        f"({'with' if projection is not None else 'without'} projection)"
    )

    return EmpiricalEstimates(
        sum_h=sum_h,
        sum_th=sum_th,
        action_weights=action_weights,
        total_weight=float(action_weights.sum()),
        sum_taoh=sum_taoh,
        projection=None if projection is None else np.asarray(projection, dtype=np.float64),
    )


def _accumulate_projected(
    sum_taoh: np.ndarray, batch: SampleBatch, weighted_h: np.ndarray, projection: np.ndarray
) -> None:
    """Add the projected operator sums of one batch in place."""

    num_kernels, rank = sum_taoh.shape[1], sum_taoh.shape[2]
    projected = batch.next_characteristic_features @ projection

    for action in np.unique(batch.middle_actions):
        rows = np.flatnonzero(batch.middle_actions == action)
        for start in range(0, len(rows), CHUNK_SIZE):
            chunk = rows[start : start + CHUNK_SIZE]
            outer = batch.middle_obs_weights[chunk, :, None] * projected[chunk, None, :]
            outer = outer.reshape(len(chunk), num_kernels * rank)
            sum_taoh[action] += (outer.T @ weighted_h[chunk]).reshape(num_kernels, rank, -1)


def merge_estimates(first: EmpiricalEstimates, second: EmpiricalEstimates) -> EmpiricalEstimates:
    """
    Combine estimates of two disjoint sample sets.

    Raises
    ------
    ValidationError
        If the estimates have different shapes or projections.
    """

    if first.sum_th.shape != second.sum_th.shape or first.num_actions != second.num_actions:
        raise ValidationError("Cannot merge estimates of different feature dimensions")

    if (first.projection is None) != (second.projection is None) or (
        first.projection is not None and not np.array_equal(first.projection, second.projection)
    ):
        raise ValidationError("Cannot merge estimates with different projections")

    return EmpiricalEstimates(
        sum_h=first.sum_h + second.sum_h,
        sum_th=first.sum_th + second.sum_th,
        action_weights=first.action_weights + second.action_weights,
        total_weight=first.total_weight + second.total_weight,
        sum_taoh=None if first.sum_taoh is None else first.sum_taoh + second.sum_taoh,
        projection=first.projection,
    )
