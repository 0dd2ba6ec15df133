"""
Principal component analysis on the sample covariance matrix (divisor n - 1).

Steps:
    1. centre the data on the training mean
    2. covariance of the centred data
    3. Jacobi eigendecomposition, eigenpairs sorted by decreasing eigenvalue
    4. keep the top-k directions, each flipped so its largest-magnitude entry is positive
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from src.helpers.errors import DatasetError
from src.helpers.jacobi import jacobi_eigh
from src.indicators import Dataset

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray   # shape (k, n_features), orthonormal rows
    eigenvalues: np.ndarray  # shape (k,), non-increasing, clamped at 0
    total_variance: float

    @property
    def k(self) -> int:
        return self.components.shape[0]


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Columns flipped so that each column's largest-magnitude entry is positive."""
    pivots = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivots, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def fit_pca(X: np.ndarray, k: int) -> PcaModel:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DatasetError(f"expected a 2-D matrix, got shape {X.shape}")
    n_rows, n_features = X.shape
    if n_rows < 2:
        raise DatasetError(f"PCA needs at least 2 rows, got {n_rows}")
    if not 1 <= k <= n_features:
        raise ValueError(f"k must lie in [1, {n_features}], got {k}")

    mean = X.mean(axis=0)
    centred = X - mean
    covariance = centred.T @ centred / (n_rows - 1)
    covariance = (covariance + covariance.T) / 2.0

    eigenvalues, vectors = jacobi_eigh(covariance)
    eigenvalues = np.where(eigenvalues < 0.0, 0.0, eigenvalues)
    vectors = _fix_signs(vectors)
    model = PcaModel(
        mean=mean,
        components=vectors[:, :k].T.copy(),
        eigenvalues=eigenvalues[:k].copy(),
        total_variance=float(np.trace(covariance)),
    )
    logger.debug("PCA k=%d explained variance %s", k, explained_variance_ratio(model))
    return model


def transform(model: PcaModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.mean.shape[0]:
        raise DatasetError(f"expected {model.mean.shape[0]} columns, got shape {X.shape}")
    return (X - model.mean) @ model.components.T


def inverse_transform(model: PcaModel, Z: np.ndarray) -> np.ndarray:
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2 or Z.shape[1] != model.k:
        raise DatasetError(f"expected {model.k} columns, got shape {Z.shape}")
    return Z @ model.components + model.mean


def explained_variance_ratio(model: PcaModel) -> np.ndarray:
    if model.total_variance <= 0.0:
        return np.zeros(model.k)
    return model.eigenvalues / model.total_variance


def reduce_pca(train: Dataset, test: Dataset, k: int) -> Tuple[Dataset, Dataset, PcaModel]:
    """Fits on the training rows only and projects both partitions onto pc1..pck."""
    model = fit_pca(train.X, k)
    names = [f"pc{i + 1}" for i in range(k)]
    return (
        train.with_features(names, transform(model, train.X)),
        test.with_features(names, transform(model, test.X)),
        model,
    )
