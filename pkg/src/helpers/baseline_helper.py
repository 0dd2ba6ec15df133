from abc import ABC, abstractmethod

import numpy as np

from src.helpers.errors import DatasetError, TrainingError
from src.helpers.selection_enum import ModelSelection


class BaselineAbstractClass(ABC):
    """
    Shared fit/predict plumbing of the classical baselines. Subclasses implement
    `_fit` and `_predict` on validated arrays; labels are {0, 1} on both sides.
    """

    kind: ModelSelection
    needs_both_classes = True

    def __init__(self):
        self.n_features = None

    def fit(self, X, y) -> "BaselineAbstractClass":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y)
        if X.ndim != 2 or X.shape[0] == 0:
            raise DatasetError(f"expected a non-empty 2-D feature matrix, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise DatasetError(f"{X.shape[0]} rows but {y.shape} labels")
        if not np.all((y == 0) | (y == 1)):
            raise DatasetError("labels must be 0 or 1")
        if self.needs_both_classes and np.unique(y).size < 2:
            raise TrainingError(f"{self.kind.value} needs both classes in the training labels")
        self.n_features = X.shape[1]
        self._fit(X, y.astype(np.int8))
        return self

    def predict(self, X) -> np.ndarray:
        if self.n_features is None:
            raise TrainingError(f"{self.kind.value} has not been fitted")
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise DatasetError(f"expected {self.n_features} features, got shape {X.shape}")
        return self._predict(X).astype(np.int8)

    @abstractmethod
    def _fit(self, X: np.ndarray, y: np.ndarray):
        pass

    @abstractmethod
    def _predict(self, X: np.ndarray) -> np.ndarray:
        pass
