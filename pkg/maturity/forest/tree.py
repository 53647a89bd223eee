"""
Weighted CART classification trees with Gini impurity, stored as flat node arrays.
"""
from pydantic import BaseModel, ConfigDict
from typing import Any, Dict, List, Optional, Tuple

import numpy as np


LEAF = -1


def gini(totals: np.ndarray) -> float:
    """Gini impurity of a vector of (weighted) class totals"""
    mass = totals.sum()
    if mass <= 0:
        return 0.0
    p = totals / mass
    return float(1.0 - np.sum(p * p))


class DecisionTree(BaseModel):
    """
    Node k is a leaf when feature[k] == -1. Split nodes send x[feature] <= threshold
    to left[k] and everything else to right[k]. value[k] holds weighted class totals.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    n_features: int
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    impurity: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    @property
    def n_classes(self) -> int:
        return self.value.shape[1]

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] == LEAF

    def node_mass(self, node: int) -> float:
        return float(self.value[node].sum())

    def leaf_distribution(self) -> np.ndarray:
        """[n_nodes x n_classes] class probabilities per node"""
        mass = self.value.sum(axis=1, keepdims=True)
        return self.value / np.where(mass > 0, mass, 1.0)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of X"""
        nodes = np.zeros(X.shape[0], dtype=int)
        active = np.flatnonzero(self.feature[nodes] != LEAF)
        while active.size:
            current = nodes[active]
            go_left = X[active, self.feature[current]] <= self.threshold[current]
            nodes[active] = np.where(go_left, self.left[current], self.right[current])
            active = active[self.feature[nodes[active]] != LEAF]
        return nodes

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self.leaf_distribution()[self.apply(X)]

    def depth(self) -> int:
        def walk(node: int) -> int:
            if self.is_leaf(node):
                return 0
            return 1 + max(walk(int(self.left[node])), walk(int(self.right[node])))
        return walk(0)

    def used_features(self) -> List[int]:
        return sorted(set(int(f) for f in self.feature if f != LEAF))

    def impurity_decrease(self) -> np.ndarray:
        """Weighted Gini decrease accumulated per feature (unnormalized)"""
        decrease = np.zeros(self.n_features)
        for node in range(self.n_nodes):
            if self.is_leaf(node):
                continue
            l, r = int(self.left[node]), int(self.right[node])
            decrease[self.feature[node]] += (
                self.node_mass(node) * self.impurity[node]
                - self.node_mass(l) * self.impurity[l]
                - self.node_mass(r) * self.impurity[r]
            )
        return np.maximum(decrease, 0.0)

    def to_nested(self, node: int = 0) -> Dict[str, Any]:
        if self.is_leaf(node):
            return {"value": self.value[node].tolist()}
        return {
            "feature": int(self.feature[node]),
            "threshold": float(self.threshold[node]),
            "left": self.to_nested(int(self.left[node])),
            "right": self.to_nested(int(self.right[node])),
        }

    @classmethod
    def from_nested(cls, document: Dict[str, Any], n_features: int) -> "DecisionTree":
        builder = _TreeBuilder()

        def visit(node: Dict[str, Any]) -> int:
            if "value" in node:
                totals = np.asarray(node["value"], dtype=float)
                return builder.add(LEAF, 0.0, totals, gini(totals))
            index = builder.add(0, 0.0, None, 0.0)
            left = visit(node["left"])
            right = visit(node["right"])
            totals = builder.values[left] + builder.values[right]
            builder.make_split(index, int(node["feature"]), float(node["threshold"]), left, right, totals, gini(totals))
            return index

        visit(document)
        return builder.build(n_features)


class _TreeBuilder:
    """Accumulates nodes in preorder"""

    def __init__(self):
        self.features: List[int] = []
        self.thresholds: List[float] = []
        self.lefts: List[int] = []
        self.rights: List[int] = []
        self.values: List[Optional[np.ndarray]] = []
        self.impurities: List[float] = []

    def add(self, feature: int, threshold: float, totals: Optional[np.ndarray], impurity: float) -> int:
        self.features.append(feature)
        self.thresholds.append(threshold)
        self.lefts.append(LEAF)
        self.rights.append(LEAF)
        self.values.append(totals)
        self.impurities.append(impurity)
        return len(self.features) - 1

    def make_split(self, index: int, feature: int, threshold: float, left: int, right: int,
                   totals: np.ndarray, impurity: float) -> None:
        self.features[index] = feature
        self.thresholds[index] = threshold
        self.lefts[index] = left
        self.rights[index] = right
        self.values[index] = totals
        self.impurities[index] = impurity

    def build(self, n_features: int) -> DecisionTree:
        return DecisionTree(
            n_features=n_features,
            feature=np.asarray(self.features, dtype=int),
            threshold=np.asarray(self.thresholds, dtype=float),
            left=np.asarray(self.lefts, dtype=int),
            right=np.asarray(self.rights, dtype=int),
            value=np.vstack(self.values),
            impurity=np.asarray(self.impurities, dtype=float),
        )


def _best_split_on_feature(
    x: np.ndarray,
    class_weights: np.ndarray,
    min_samples_leaf: int,
) -> Optional[Tuple[float, float]]:
    """(child weighted impurity, threshold) of the best midpoint split on one feature, or None"""
    order = np.argsort(x, kind="stable")
    xs = x[order]
    n = xs.shape[0]
    cumulative = np.cumsum(class_weights[order], axis=0)
    total = cumulative[-1]

    positions = np.arange(n - 1)
    valid = (xs[:-1] < xs[1:]) & (positions + 1 >= min_samples_leaf) & (n - positions - 1 >= min_samples_leaf)
    if not np.any(valid):
        return None
    positions = positions[valid]

    left = cumulative[positions]
    right = total[None, :] - left
    left_mass = left.sum(axis=1)
    right_mass = right.sum(axis=1)
    left_gini = 1.0 - np.sum((left / left_mass[:, None]) ** 2, axis=1)
    right_gini = 1.0 - np.sum((right / right_mass[:, None]) ** 2, axis=1)
    child = left_mass * left_gini + right_mass * right_gini

    # argmin returns the first minimum, i.e. the lowest threshold
    best = int(np.argmin(child))
    i = positions[best]
    threshold = 0.5 * (xs[i] + xs[i + 1])
    if threshold >= xs[i + 1]:
        threshold = xs[i]
    return float(child[best]), float(threshold)


def grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    sample_weight: np.ndarray,
    n_classes: int,
    rng: np.random.Generator,
    max_depth: int = 10,
    min_samples_leaf: int = 1,
    max_features: Optional[int] = None,
) -> DecisionTree:
    """
    Grow one tree on the rows with positive weight. Each split examines `max_features`
    randomly drawn features in ascending index order; ties in gain keep the earlier
    feature and the lower threshold.
    """
    n_features = X.shape[1]
    k = n_features if max_features is None else max(1, min(max_features, n_features))
    rows = np.flatnonzero(sample_weight > 0)
    weighted = np.zeros((X.shape[0], n_classes))
    weighted[np.arange(X.shape[0]), y] = sample_weight

    builder = _TreeBuilder()

    def grow(idx: np.ndarray, depth: int) -> int:
        totals = weighted[idx].sum(axis=0)
        impurity = gini(totals)
        node = builder.add(LEAF, 0.0, totals, impurity)
        if depth >= max_depth or impurity <= 0.0 or idx.size < 2 * min_samples_leaf:
            return node

        parent = totals.sum() * impurity
        candidates = np.sort(rng.choice(n_features, size=k, replace=False))
        best_feature, best_threshold, best_gain = LEAF, 0.0, -np.inf
        for feature in candidates:
            found = _best_split_on_feature(X[idx, feature], weighted[idx], min_samples_leaf)
            if found is None:
                continue
            gain = parent - found[0]
            if gain > best_gain:
                best_feature, best_threshold, best_gain = int(feature), found[1], gain
        if best_feature == LEAF:
            return node

        go_left = X[idx, best_feature] <= best_threshold
        left = grow(idx[go_left], depth + 1)
        right = grow(idx[~go_left], depth + 1)
        builder.make_split(node, best_feature, best_threshold, left, right, totals, impurity)
        return node

    grow(rows, 0)
    return builder.build(n_features)
