"""
Classifiers: a kernel SVM trained by sequential minimal optimization (shared by the
classical SVM and the quantum-kernel SVM) plus the classical baselines.

Labels are {0, 1} outside this module's SVM internals, which work with {-1, +1}.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from src.helpers.baseline_helper import BaselineAbstractClass
from src.helpers.constants import (
    BOOSTING_DEPTH,
    BOOSTING_LEARNING_RATE,
    BOOSTING_ROUNDS,
    FOREST_TREES,
    KNN_NEIGHBOURS,
    LOGREG_EPOCHS,
    LOGREG_L2,
    LOGREG_LEARNING_RATE,
    NB_VAR_SMOOTHING,
    SVM_C,
    SVM_MAX_PASSES,
    SVM_TOL,
    TREE_MAX_DEPTH,
)
from src.helpers.errors import DatasetError, TrainingError
from src.helpers.selection_enum import ModelSelection
from src.helpers.tree_helper import CartTree

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class KernelDescriptor:
    kind: str = "precomputed"  # "rbf", "linear" or "precomputed"
    gamma: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("rbf", "linear", "precomputed"):
            raise ValueError(f"unknown kernel kind '{self.kind}'")
        if self.gamma is not None and self.gamma <= 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")

    def gram(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        if self.kind == "linear":
            return A @ B.T
        squared = (np.sum(A ** 2, axis=1)[:, None] + np.sum(B ** 2, axis=1)[None, :] - 2.0 * A @ B.T)
        return np.exp(-self.gamma * np.maximum(squared, 0.0))


def default_gamma(X: np.ndarray) -> float:
    """1 / (n_features * var(X)), falling back to 1 / n_features for constant X."""
    variance = float(np.var(X))
    return 1.0 / (X.shape[1] * variance) if variance > 0 else 1.0 / X.shape[1]


@dataclass(frozen=True)
class SvmModel:
    alphas: np.ndarray
    bias: float
    y_signed: np.ndarray
    kernel: KernelDescriptor
    C: float
    X_train: Optional[np.ndarray] = None
    iterations: int = 0

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.alphas > 0)


def _signed_labels(y) -> np.ndarray:
    y = np.asarray(y)
    if not np.all((y == 0) | (y == 1)):
        raise DatasetError("labels must be 0 or 1")
    if np.unique(y).size < 2:
        raise TrainingError("SVM training needs both classes")
    return np.where(y == 1, 1.0, -1.0)


def _smo(K: np.ndarray, y: np.ndarray, C: float, tol: float, max_iter: int):
    """
    SMO on the dual  max sum(a) - 1/2 sum a_i a_j y_i y_j K_ij,  0 <= a <= C, sum a_i y_i = 0.

    Working pair: the maximal KKT violator i (smallest error among the points allowed to
    increase y_t a_t) paired with j (largest error among the points allowed to decrease it),
    i.e. the pair with maximal |E_i - E_j|; index order breaks ties.
    """
    n = y.size
    alphas = np.zeros(n)
    errors = -y.copy()  # sum_s a_s y_s K_ts - y_t, bias excluded
    iterations = 0

    while iterations < max_iter:
        up = ((y > 0) & (alphas < C)) | ((y < 0) & (alphas > 0))
        low = ((y > 0) & (alphas > 0)) | ((y < 0) & (alphas < C))
        if not up.any() or not low.any():
            break
        i = int(np.argmin(np.where(up, errors, np.inf)))
        j = int(np.argmax(np.where(low, errors, -np.inf)))
        if errors[j] - errors[i] < tol:
            break

        eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if eta <= 0.0:
            eta = 1e-12
        if y[i] != y[j]:
            lower, upper = max(0.0, alphas[j] - alphas[i]), min(C, C + alphas[j] - alphas[i])
        else:
            lower, upper = max(0.0, alphas[i] + alphas[j] - C), min(C, alphas[i] + alphas[j])

        new_j = float(np.clip(alphas[j] + y[j] * (errors[i] - errors[j]) / eta, lower, upper))
        new_i = alphas[i] + y[i] * y[j] * (alphas[j] - new_j)
        new_i = min(max(new_i, 0.0), C)

        errors += (new_i - alphas[i]) * y[i] * K[:, i] + (new_j - alphas[j]) * y[j] * K[:, j]
        alphas[i], alphas[j] = new_i, new_j
        iterations += 1
    else:
        logger.warning("SMO stopped at the iteration cap (%d) before reaching tol=%g", max_iter, tol)

    free = (alphas > 0) & (alphas < C)
    if free.any():
        bias = float(np.mean(-errors[free]))
    else:
        up = ((y > 0) & (alphas < C)) | ((y < 0) & (alphas > 0))
        low = ((y > 0) & (alphas > 0)) | ((y < 0) & (alphas < C))
        bound_up = np.min(np.where(up, errors, np.inf))
        bound_low = np.max(np.where(low, errors, -np.inf))
        finite = [v for v in (bound_up, bound_low) if np.isfinite(v)]
        bias = -float(np.mean(finite)) if finite else 0.0
    return alphas, bias, iterations


def train_svm(data, y, kernel: KernelDescriptor = KernelDescriptor(), C: float = SVM_C,
              tol: float = SVM_TOL, max_passes: int = SVM_MAX_PASSES) -> SvmModel:
    """
    Trains on a precomputed Gram matrix (kernel.kind == "precomputed") or on a feature
    matrix with an rbf/linear kernel. The iteration cap is max_passes * n_samples.
    """
    if C <= 0:
        raise ValueError(f"C must be positive, got {C}")
    data = np.asarray(data, dtype=float)
    y_signed = _signed_labels(y)

    if kernel.kind == "precomputed":
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise TrainingError(f"precomputed kernel must be square, got shape {data.shape}")
        if not np.allclose(data, data.T, rtol=0.0, atol=1e-10):
            raise TrainingError("precomputed kernel is not symmetric")
        K, X_train = data, None
    else:
        if data.ndim != 2 or data.shape[0] == 0:
            raise DatasetError(f"expected a non-empty 2-D feature matrix, got shape {data.shape}")
        if kernel.kind == "rbf" and kernel.gamma is None:
            kernel = KernelDescriptor("rbf", default_gamma(data))
        K, X_train = kernel.gram(data, data), data
    if K.shape[0] != y_signed.size:
        raise DatasetError(f"{K.shape[0]} training points but {y_signed.size} labels")

    alphas, bias, iterations = _smo(K, y_signed, C, tol, max_passes * y_signed.size)
    logger.debug("SMO converged in %d iterations, %d support vectors", iterations, int(np.sum(alphas > 0)))
    return SvmModel(alphas, bias, y_signed, kernel, C, X_train, iterations)


def decision_function(model: SvmModel, data) -> np.ndarray:
    data = np.asarray(data, dtype=float)
    if model.kernel.kind == "precomputed":
        if data.ndim != 2 or data.shape[1] != model.alphas.size:
            raise DatasetError(f"kernel rows must have {model.alphas.size} columns, got shape {data.shape}")
        K = data
    else:
        if data.ndim != 2 or data.shape[1] != model.X_train.shape[1]:
            raise DatasetError(f"expected {model.X_train.shape[1]} features, got shape {data.shape}")
        K = model.kernel.gram(data, model.X_train)
    return K @ (model.alphas * model.y_signed) + model.bias


def predict_svm(model: SvmModel, data) -> np.ndarray:
    return (decision_function(model, data) > 0).astype(np.int8)


def dual_value(alphas: np.ndarray, y_signed: np.ndarray, K: np.ndarray) -> float:
    """sum(a) - 1/2 (a y)^T K (a y) for any a, feasible or not."""
    weighted = np.asarray(alphas, dtype=float) * y_signed
    return float(np.sum(alphas) - 0.5 * weighted @ K @ weighted)


def dual_objective(model: SvmModel, K: np.ndarray) -> float:
    return dual_value(model.alphas, model.y_signed, K)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


class LogisticRegressionModel(BaselineAbstractClass):
    kind = ModelSelection.logistic_regression

    def __init__(self, learning_rate: float = LOGREG_LEARNING_RATE, epochs: int = LOGREG_EPOCHS,
                 l2: float = LOGREG_L2):
        super().__init__()
        if learning_rate <= 0 or epochs < 0 or l2 < 0:
            raise ValueError("learning_rate must be positive, epochs and l2 non-negative")
        self.learning_rate, self.epochs, self.l2 = learning_rate, epochs, l2
        self.weights = None
        self.intercept = 0.0
        self.loss_history: List[float] = []

    def _loss(self, X, y) -> float:
        z = X @ self.weights + self.intercept
        # log(1 + e^z) - y z, written to stay finite
        return float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * self.l2 * self.weights @ self.weights)

    def _fit(self, X, y):
        y = y.astype(float)
        self.weights = np.zeros(X.shape[1])
        self.intercept = 0.0
        self.loss_history = [self._loss(X, y)]
        for _ in range(self.epochs):
            residual = _sigmoid(X @ self.weights + self.intercept) - y
            self.weights -= self.learning_rate * (X.T @ residual / X.shape[0] + self.l2 * self.weights)
            self.intercept -= self.learning_rate * float(residual.mean())
            self.loss_history.append(self._loss(X, y))

    def _predict(self, X):
        return X @ self.weights + self.intercept > 0


class KnnModel(BaselineAbstractClass):
    kind = ModelSelection.knn
    needs_both_classes = False

    def __init__(self, k: int = KNN_NEIGHBOURS):
        super().__init__()
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        self.k = k

    def _fit(self, X, y):
        if self.k > X.shape[0]:
            raise ValueError(f"k={self.k} exceeds the {X.shape[0]} training rows")
        self.X_train, self.y_train = X, y

    def _predict(self, X):
        distances = np.sum((X[:, None, :] - self.X_train[None, :, :]) ** 2, axis=2)
        # stable sort: equidistant neighbours keep the lower training index first
        nearest = np.argsort(distances, axis=1, kind="stable")[:, : self.k]
        votes = self.y_train[nearest].sum(axis=1)
        return 2 * votes > self.k


class GaussianNbModel(BaselineAbstractClass):
    kind = ModelSelection.gaussian_nb

    def __init__(self, var_smoothing: float = NB_VAR_SMOOTHING):
        super().__init__()
        self.var_smoothing = var_smoothing

    def _fit(self, X, y):
        epsilon = self.var_smoothing * max(float(np.var(X, axis=0).max()), 1e-300)
        self.log_priors = np.array([np.log(np.mean(y == c)) for c in (0, 1)])
        self.means = np.array([X[y == c].mean(axis=0) for c in (0, 1)])
        self.variances = np.array([X[y == c].var(axis=0) + epsilon for c in (0, 1)])

    def _log_posteriors(self, X):
        return np.column_stack([
            self.log_priors[c]
            - 0.5 * np.sum(np.log(2.0 * np.pi * self.variances[c]))
            - 0.5 * np.sum((X - self.means[c]) ** 2 / self.variances[c], axis=1)
            for c in (0, 1)
        ])

    def _predict(self, X):
        scores = self._log_posteriors(X)
        return scores[:, 1] > scores[:, 0]


class DecisionTreeModel(BaselineAbstractClass):
    kind = ModelSelection.decision_tree
    needs_both_classes = False

    def __init__(self, max_depth: Optional[int] = TREE_MAX_DEPTH):
        super().__init__()
        self.max_depth = max_depth

    def _fit(self, X, y):
        self.tree = CartTree("gini", max_depth=self.max_depth).fit(X, y)

    def _predict(self, X):
        return self.tree.predict_values(X) > 0.5


class RandomForestModel(BaselineAbstractClass):
    """
    Trees are grown from generators seeded by (seed, tree index), so each tree is
    reproducible on its own; the vote is a majority with ties to 0.
    """

    kind = ModelSelection.random_forest
    needs_both_classes = False

    def __init__(self, n_trees: int = FOREST_TREES, max_depth: Optional[int] = TREE_MAX_DEPTH,
                 bootstrap: bool = True, max_features: Optional[str] = "sqrt", seed: int = 0):
        super().__init__()
        if n_trees < 1:
            raise ValueError(f"n_trees must be >= 1, got {n_trees}")
        if max_features not in (None, "sqrt"):
            raise ValueError(f"max_features must be 'sqrt' or None, got {max_features}")
        self.n_trees, self.max_depth, self.bootstrap = n_trees, max_depth, bootstrap
        self.max_features, self.seed = max_features, seed
        self.trees: List[CartTree] = []

    def _fit(self, X, y):
        n, d = X.shape
        features = max(1, int(np.sqrt(d))) if self.max_features == "sqrt" else None
        self.trees = []
        for t in range(self.n_trees):
            rng = np.random.default_rng([self.seed, t])
            rows = rng.integers(0, n, size=n) if self.bootstrap else np.arange(n)
            tree = CartTree("gini", max_depth=self.max_depth, max_features=features, rng=rng)
            self.trees.append(tree.fit(X[rows], y[rows]))

    def _predict(self, X):
        votes = np.sum([tree.predict_values(X) for tree in self.trees], axis=0)
        return 2 * votes > len(self.trees)


class GradientBoostingModel(BaselineAbstractClass):
    """
    Logistic-loss gradient boosting: regression trees fitted to the residuals y - p,
    leaf values set by one Newton step sum(r) / sum(p (1 - p)).
    """

    kind = ModelSelection.gradient_boosting

    def __init__(self, rounds: int = BOOSTING_ROUNDS, max_depth: int = BOOSTING_DEPTH,
                 learning_rate: float = BOOSTING_LEARNING_RATE):
        super().__init__()
        if rounds < 0 or learning_rate <= 0:
            raise ValueError("rounds must be >= 0 and learning_rate positive")
        self.rounds, self.max_depth, self.learning_rate = rounds, max_depth, learning_rate
        self.trees: List[CartTree] = []
        self.initial = 0.0

    def _fit(self, X, y):
        y = y.astype(float)
        positive = float(y.mean())
        self.initial = float(np.log(positive / (1.0 - positive)))
        raw = np.full(X.shape[0], self.initial)
        self.trees = []
        for _ in range(self.rounds):
            p = _sigmoid(raw)
            residual = y - p
            tree = CartTree("mse", max_depth=self.max_depth).fit(X, residual)
            leaves = tree.apply(X)
            updates: Dict[int, float] = {}
            for leaf in np.unique(leaves):
                members = leaves == leaf
                hessian = float(np.sum(p[members] * (1.0 - p[members])))
                updates[int(leaf)] = float(residual[members].sum()) / max(hessian, 1e-12)
            tree.set_leaf_values(updates)
            raw += self.learning_rate * tree.predict_values(X)
            self.trees.append(tree)

    def raw_scores(self, X):
        raw = np.full(X.shape[0], self.initial)
        for tree in self.trees:
            raw += self.learning_rate * tree.predict_values(X)
        return raw

    def _predict(self, X):
        return self.raw_scores(X) > 0


class XgBoostModel(GradientBoostingModel):
    """"XG Boost" rows of the grid; trained exactly like the gradient-boosting baseline."""

    kind = ModelSelection.xgboost


BASELINE_CLASSES = {
    ModelSelection.logistic_regression: LogisticRegressionModel,
    ModelSelection.knn: KnnModel,
    ModelSelection.gaussian_nb: GaussianNbModel,
    ModelSelection.decision_tree: DecisionTreeModel,
    ModelSelection.random_forest: RandomForestModel,
    ModelSelection.gradient_boosting: GradientBoostingModel,
    ModelSelection.xgboost: XgBoostModel,
}


def train_baseline(kind: ModelSelection, X, y, params: Optional[dict] = None) -> BaselineAbstractClass:
    if kind not in BASELINE_CLASSES:
        raise ValueError(f"{kind.name} is not a baseline model")
    model = BASELINE_CLASSES[kind](**(params or {}))
    return model.fit(X, y)


def predict_baseline(model: BaselineAbstractClass, X) -> np.ndarray:
    return model.predict(X)

