"""Parameter recovery by truncated SVD and pseudoinversion."""

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from tpsr.errors import ConfigError, RankDeficient, RankDeficientWarning, ValidationError
from tpsr.learning.estimates import EmpiricalEstimates
from tpsr.model.tpsr import TpsrModel

#: Relative size of the trailing singular value below which a warning is raised.
RANK_WARNING_RATIO = 1e-10


@dataclass(frozen=True)
class LearnConfig:
    """
    Settings of the spectral learner.

    Parameters
    ----------
    rank_n : int
        Dimension of the learned state.
    svd_tail_report : bool
        Whether to log the head of the singular-value spectrum.
    pinv_rel_tol : float
        Relative singular-value cutoff of every pseudoinverse.
    stride : int
        Distance between consecutive window offsets.
    burn_in : int
        Number of leading pairs of every trajectory to skip.
    """

    rank_n: int = 5
    svd_tail_report: bool = True
    pinv_rel_tol: float = 1e-12
    stride: int = 1
    burn_in: int = 0

    def __post_init__(self) -> None:
        if self.rank_n < 1:
            raise ConfigError(f"rank_n must be at least 1, got {self.rank_n}")
        if not 0 < self.pinv_rel_tol < 1:
            raise ConfigError(f"pinv_rel_tol must lie in (0, 1), got {self.pinv_rel_tol}")
        if self.stride < 1:
            raise ConfigError(f"stride must be positive, got {self.stride}")
        if self.burn_in < 0:
            raise ConfigError(f"burn_in must be nonnegative, got {self.burn_in}")


def truncated_svd(p_th: np.ndarray, rank_n: int) -> tuple[np.ndarray, np.ndarray]:
    """
    Find the leading left singular vectors of the moment matrix.

    Each singular vector is signed so that its largest-magnitude entry
    is positive.

    Parameters
    ----------
    p_th : numpy.ndarray
        Test/history moment matrix, shape `(d_T, d_H)`.
    rank_n : int
        Number of singular vectors to keep.

    Returns
    -------
    projection : numpy.ndarray
        Orthonormal columns `U`, shape `(d_T, rank_n)`.
    spectrum : numpy.ndarray
        Every singular value, in descending order.

    Raises
    ------
    ValidationError
        If `rank_n` exceeds the smaller dimension of `p_th`.

    Warns
    -----
    RankDeficientWarning
        If the last kept singular value is below `1e-10` times the
        largest.
    """

    p_th = np.asarray(p_th, dtype=np.float64)
    if not 1 <= rank_n <= min(p_th.shape):
        raise ValidationError(f"Cannot take rank {rank_n} of a {p_th.shape} moment matrix")

    left, spectrum, _ = linalg.svd(p_th, full_matrices=False)
    projection = left[:, :rank_n]
    pivots = np.argmax(np.abs(projection), axis=0)
    projection = projection * np.sign(projection[pivots, np.arange(rank_n)])

    if spectrum[0] <= 0 or spectrum[rank_n - 1] / spectrum[0] < RANK_WARNING_RATIO:
        message = f"Singular value {rank_n} is negligible; the moments have lower rank"
        logging.warning(message)
        warnings.warn(message, RankDeficientWarning, stacklevel=2)

    return projection, spectrum


def pseudoinverse(matrix: np.ndarray, rel_tol: float) -> tuple[np.ndarray, int]:
    """Pseudoinvert with cutoff `rel_tol * sigma_max`; also return the rank kept."""

    inverse, rank = linalg.pinv(matrix, atol=0.0, rtol=rel_tol, return_rank=True)

    return inverse, int(rank)


def estimate_parameters(
    est: EmpiricalEstimates,
    projection: np.ndarray,
    cfg: LearnConfig,
    actions: tuple[str, ...] = (),
    feature_map_ref: str = "",
) -> TpsrModel:
    """
    Recover TPSR parameters from projected moments.

    With `e` the all-ones vector (normalized indicative features sum to
    one, so `1` is the constant function):

    * `b1 = U^T P_TH e`,
    * `b_inf = (P_TH^T U)^+ P_H`,
    * `B_{a,j} = (U^T P_{T,ao_j,H}) (U^T P_TH)^+`.

    Parameters
    ----------
    est : EmpiricalEstimates
        Estimates whose operator sums were projected with `projection`.
    projection : numpy.ndarray
        The projection `U` from `truncated_svd`.
    cfg : LearnConfig
        Learner settings; `pinv_rel_tol` sets the pseudoinverse cutoff.
    actions : tuple[str, ...], optional
        Action labels for the model.
    feature_map_ref : str, optional
        Checksum of the feature map behind the estimates.

    Returns
    -------
    model : TpsrModel
        The assembled model.

    Raises
    ------
    ValidationError
        If the estimates were projected with another matrix.
    RankDeficient
        If the projected moments have rank below `rank_n` at the cutoff.
    """

    projection = np.asarray(projection, dtype=np.float64)
    if est.projection is None or not np.array_equal(est.projection, projection):
        raise ValidationError("The estimates were not projected with this projection")

    p_th, p_h = est.p_th, est.p_h
    rank_n = projection.shape[1]

    projected = projection.T @ p_th
    inverse, rank = pseudoinverse(projected, cfg.pinv_rel_tol)
    if rank < rank_n:
        raise RankDeficient(f"U^T P_TH has rank {rank} at the cutoff; the model needs {rank_n}")

    normalizer_inverse, _ = pseudoinverse(p_th.T @ projection, cfg.pinv_rel_tol)

    b1 = projected @ np.ones(p_th.shape[1])
    b_inf = normalizer_inverse @ p_h
    operators = est.proj_p_taoh @ inverse

    logging.info(f"Recovered rank-{rank_n} parameters; b_inf . b1 = {b_inf @ b1:.6f}")

    return TpsrModel(
        b1=b1,
        b_inf=b_inf,
        operators=operators,
        projection_u=projection,
        actions=actions,
        feature_map_ref=feature_map_ref,
    )


def learn_from_estimates(
    est: EmpiricalEstimates, cfg: LearnConfig, actions: tuple[str, ...] = (), feature_map_ref=""
) -> tuple[TpsrModel, np.ndarray]:
    """
    Learn a model from estimates carrying raw operator sums.

    Used with analytic or enumerated moments, where the raw sums are
    small enough to hold: the SVD fixes `U`, the raw sums are projected
    and the parameters recovered.

    Returns
    -------
    model : TpsrModel
        The learned model.
    spectrum : numpy.ndarray
        Singular values of `p_th`.
    """

    projection, spectrum = truncated_svd(est.p_th, cfg.rank_n)
    model = estimate_parameters(est.project(projection), projection, cfg, actions, feature_map_ref)

    return model, spectrum
