from dataclasses import dataclass
from typing import List, Optional

import numpy as np


@dataclass
class TreeNode:
    feature: int = -1
    threshold: float = 0.0
    left: int = -1
    right: int = -1
    value: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0


class CartTree:
    """
    Binary CART tree. `criterion` is "gini" for 0/1 labels (leaf value = majority label,
    ties to 0) or "mse" for real targets (leaf value = mean).

    Splits are scanned feature by feature in ascending index order and threshold by
    threshold in ascending value order; the first best split wins. An impure node is
    split even when no split lowers the impurity, so an unlimited-depth gini tree fits
    any dataset without conflicting duplicates exactly.
    """

    def __init__(self, criterion: str = "gini", max_depth: Optional[int] = None,
                 min_samples_split: int = 2, max_features: Optional[int] = None,
                 rng: Optional[np.random.Generator] = None):
        if criterion not in ("gini", "mse"):
            raise ValueError(f"unknown criterion '{criterion}'")
        if max_depth is not None and max_depth < 0:
            raise ValueError(f"max_depth must be >= 0, got {max_depth}")
        if max_features is not None and max_features < 1:
            raise ValueError(f"max_features must be >= 1, got {max_features}")
        self.criterion = criterion
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.max_features = max_features
        self.rng = rng
        self.nodes: List[TreeNode] = []
        self.n_features = 0

    def fit(self, X: np.ndarray, target: np.ndarray) -> "CartTree":
        X = np.asarray(X, dtype=float)
        target = np.asarray(target, dtype=float)
        self.n_features = X.shape[1]
        self.nodes = []
        self._grow(X, target, np.arange(X.shape[0]), 0)
        return self

    def _leaf_value(self, target: np.ndarray) -> float:
        if self.criterion == "gini":
            return 1.0 if 2 * target.sum() > target.size else 0.0
        return float(target.mean())

    def _is_pure(self, target: np.ndarray) -> bool:
        return bool(np.all(target == target[0]))

    def _candidate_features(self) -> np.ndarray:
        if self.max_features is None or self.max_features >= self.n_features:
            return np.arange(self.n_features)
        return np.sort(self.rng.choice(self.n_features, size=self.max_features, replace=False))

    def _split_scores(self, sorted_target: np.ndarray) -> np.ndarray:
        """Weighted child impurity for a split after each position 0..n-2."""
        n = sorted_target.size
        left_n = np.arange(1, n)
        right_n = n - left_n
        left_sum = np.cumsum(sorted_target)[:-1]
        right_sum = sorted_target.sum() - left_sum
        if self.criterion == "gini":
            left_p = left_sum / left_n
            right_p = right_sum / right_n
            left_gini = 2.0 * left_p * (1.0 - left_p)
            right_gini = 2.0 * right_p * (1.0 - right_p)
            return (left_n * left_gini + right_n * right_gini) / n
        left_sq = np.cumsum(sorted_target ** 2)[:-1]
        right_sq = np.sum(sorted_target ** 2) - left_sq
        return (left_sq - left_sum ** 2 / left_n) + (right_sq - right_sum ** 2 / right_n)

    def _best_split(self, X: np.ndarray, target: np.ndarray, rows: np.ndarray):
        best = None
        for feature in self._candidate_features():
            values = X[rows, feature]
            order = np.argsort(values, kind="stable")
            xs, ts = values[order], target[rows][order]
            valid = xs[:-1] < xs[1:]
            if not valid.any():
                continue
            scores = np.where(valid, self._split_scores(ts), np.inf)
            position = int(np.argmin(scores))
            if best is None or scores[position] < best[0]:
                threshold = (xs[position] + xs[position + 1]) / 2.0
                if threshold >= xs[position + 1]:
                    threshold = xs[position]
                best = (scores[position], int(feature), float(threshold))
        return best

    def _grow(self, X: np.ndarray, target: np.ndarray, rows: np.ndarray, depth: int) -> int:
        index = len(self.nodes)
        node = TreeNode(value=self._leaf_value(target[rows]))
        self.nodes.append(node)

        if (self.max_depth is not None and depth >= self.max_depth) or rows.size < self.min_samples_split \
                or self._is_pure(target[rows]):
            return index
        split = self._best_split(X, target, rows)
        if split is None:
            return index

        _, feature, threshold = split
        goes_left = X[rows, feature] <= threshold
        node.feature, node.threshold = feature, threshold
        node.left = self._grow(X, target, rows[goes_left], depth + 1)
        node.right = self._grow(X, target, rows[~goes_left], depth + 1)
        return index

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row."""
        X = np.asarray(X, dtype=float)
        leaves = np.empty(X.shape[0], dtype=np.int64)
        for r in range(X.shape[0]):
            position = 0
            while not self.nodes[position].is_leaf:
                node = self.nodes[position]
                position = node.left if X[r, node.feature] <= node.threshold else node.right
            leaves[r] = position
        return leaves

    def predict_values(self, X: np.ndarray) -> np.ndarray:
        values = np.array([node.value for node in self.nodes])
        return values[self.apply(X)]

    def set_leaf_values(self, leaf_values: dict):
        for position, value in leaf_values.items():
            self.nodes[position].value = float(value)
