"""PCA whitening of raw observations and observation windows."""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from tpsr.errors import DegenerateData

#: Eigenvalues below this fraction of the largest one are floored.
EIGENVALUE_FLOOR = 1e-12


@dataclass(frozen=True)
class WhiteningTransform:
    """An affine map to coordinates with identity covariance.

    Parameters
    ----------
    mean : numpy.ndarray
        Sample mean of the raw vectors, length `d`.
    basis : numpy.ndarray
        Orthonormal eigenvectors of the sample covariance as columns,
        shape `(d, k)`, ordered by decreasing eigenvalue.
    scales : numpy.ndarray
        Inverse square roots of the (floored) eigenvalues, length `k`.
    """

    mean: np.ndarray
    basis: np.ndarray
    scales: np.ndarray

    @property
    def input_dim(self) -> int:
        """Dimension of the raw vectors."""
        return len(self.mean)

    @property
    def output_dim(self) -> int:
        """Dimension of the whitened vectors."""
        return len(self.scales)

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Whiten one vector or a batch of vectors (leading axis)."""

        x = np.asarray(x, dtype=np.float64)

        return ((x - self.mean) @ self.basis) * self.scales


def fit_whitening(observations: np.ndarray, components: int | None = None) -> WhiteningTransform:
    """Fit a PCA whitening transform to a sample.

    Eigenvalues of the sample covariance below `1e-12` times the largest
    eigenvalue are raised to that threshold before taking inverse
    square roots.

    Parameters
    ----------
    observations : numpy.ndarray
        Sample of raw vectors, shape `(N, d)` with `N >= 2`.
    components : int, optional
        Keep only this many leading principal directions. By default all
        `d` directions are kept.

    Returns
    -------
    WhiteningTransform
        The fitted transform.

    Raises
    ------
    DegenerateData
        If all samples are identical.
    """

    observations = np.asarray(observations, dtype=np.float64)
    if observations.ndim == 1:
        observations = observations[:, None]
    assert len(observations) >= 2, "At least two samples are needed to fit a whitening"

    mean = observations.mean(axis=0)
    centred = observations - mean
    covariance = centred.T @ centred / (len(observations) - 1)
    assert np.all(np.isfinite(covariance)), "Sample covariance is not finite"

    eigvals, eigvecs = linalg.eigh(covariance)
    order = np.argsort(eigvals)[::-1]
    eigvals, eigvecs = eigvals[order], eigvecs[:, order]

    # Fix the sign of each eigenvector: largest-magnitude entry positive
    pivots = np.argmax(np.abs(eigvecs), axis=0)
    eigvecs = eigvecs * np.sign(eigvecs[pivots, np.arange(eigvecs.shape[1])])

    if eigvals[0] <= 0:
        raise DegenerateData("Cannot whiten a sample whose points are all identical")

    if components:
        eigvals, eigvecs = eigvals[:components], eigvecs[:, :components]

    threshold = EIGENVALUE_FLOOR * eigvals[0]
    floored = np.maximum(eigvals, threshold)
    if np.any(eigvals < threshold):
        logging.debug(f"Flooring {np.sum(eigvals < threshold)} eigenvalues to {threshold:.3e}")

    return WhiteningTransform(mean=mean, basis=eigvecs, scales=1.0 / np.sqrt(floored))
