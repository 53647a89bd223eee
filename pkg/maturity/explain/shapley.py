"""
Exact interventional Shapley values for the forest.

For one tree, one instance x and one background row b, the hybrid point z_S follows x
on S and b elsewhere, so each leaf is reached iff S contains every feature the path
needs from x (set A) and none it needs from b (set B). That leaf's game has closed-form
Shapley values, and the tree's attribution is their sum over reachable leaves. Rows
of the background that share (node, A, B) are walked together.
"""
from pydantic import BaseModel, ConfigDict
from typing import Callable, List, Optional, Sequence, Tuple
import logging
import math

import numpy as np
from scipy.special import comb

from maturity.errors import DimensionMismatch, EmptyBackground, TooManyFeatures
from maturity.forest.ensemble import Forest, predict_proba
from maturity.forest.tree import DecisionTree
from maturity.utils.seeding import make_rng


logger = logging.getLogger(__name__)

BACKGROUND_STREAM = 0xBA5E
MAX_BRUTE_FORCE_FEATURES = 15


class ShapExplanation(BaseModel):
    """values[c, j] is feature j's attribution to the probability of forest.classes[c]"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    base_value: np.ndarray
    values: np.ndarray
    classes: List[int]
    feature_names: Optional[List[str]] = None
    instance: Optional[str] = None

    def for_class(self, label: int) -> np.ndarray:
        return self.values[self.classes.index(int(label))]

    def base_for_class(self, label: int) -> float:
        return float(self.base_value[self.classes.index(int(label))])

    def output(self, label: int) -> float:
        return self.base_for_class(label) + float(self.for_class(label).sum())


class GlobalImportance(BaseModel):
    model_config = ConfigDict(frozen=True)

    feature_names: List[str]
    importance: List[float]

    def ranking(self) -> List[Tuple[str, float]]:
        """Descending by mean |SHAP|, feature order on ties"""
        order = np.argsort(-np.asarray(self.importance), kind="stable")
        return [(self.feature_names[j], self.importance[j]) for j in order]

    def top(self, n: int) -> List[Tuple[str, float]]:
        return self.ranking()[:n]


def sample_background(X: np.ndarray, size: int, seed: int) -> np.ndarray:
    """All rows when there are at most `size`, otherwise a seeded subsample in row order"""
    if X.shape[0] == 0:
        raise EmptyBackground("background set is empty")
    if X.shape[0] <= size:
        return X
    rows = np.sort(make_rng(seed, BACKGROUND_STREAM).choice(X.shape[0], size=size, replace=False))
    return X[rows]


def _leaf_weights(a: int, c: int) -> Tuple[float, float]:
    """Shapley weight for a player in A and (negated) for one in B of the leaf game"""
    total = math.factorial(a + c)
    in_a = math.factorial(a - 1) * math.factorial(c) / total if a else 0.0
    in_b = math.factorial(a) * math.factorial(c - 1) / total if c else 0.0
    return in_a, in_b


def tree_shap(tree: DecisionTree, x: np.ndarray, background: np.ndarray) -> np.ndarray:
    """[n_classes x n_features] attributions summed over the background rows"""
    phi = np.zeros((tree.n_classes, tree.n_features))
    distribution = tree.leaf_distribution()

    def walk(node: int, rows: np.ndarray, in_a: Tuple[int, ...], in_b: Tuple[int, ...]) -> None:
        if rows.size == 0:
            return
        if tree.is_leaf(node):
            a, c = len(in_a), len(in_b)
            if a + c == 0:
                return
            weight_a, weight_b = _leaf_weights(a, c)
            mass = rows.size * distribution[node]
            if a:
                phi[:, list(in_a)] += (mass * weight_a)[:, None]
            if c:
                phi[:, list(in_b)] -= (mass * weight_b)[:, None]
            return

        feature = int(tree.feature[node])
        threshold = tree.threshold[node]
        x_left = x[feature] <= threshold
        x_child = int(tree.left[node] if x_left else tree.right[node])
        b_child = int(tree.right[node] if x_left else tree.left[node])
        differs = (background[rows, feature] <= threshold) != x_left

        if feature in in_a:
            walk(x_child, rows, in_a, in_b)
        elif feature in in_b:
            walk(x_child, rows[~differs], in_a, in_b)
            walk(b_child, rows[differs], in_a, in_b)
        else:
            walk(x_child, rows[~differs], in_a, in_b)
            walk(x_child, rows[differs], in_a + (feature,), in_b)
            walk(b_child, rows[differs], in_a, in_b + (feature,))

    walk(0, np.arange(background.shape[0]), (), ())
    return phi


def shap_values(
    forest: Forest,
    x: np.ndarray,
    background: np.ndarray,
    instance: Optional[str] = None,
) -> ShapExplanation:
    """Exact interventional Shapley values of predict_proba for every class"""
    background = np.atleast_2d(np.asarray(background, dtype=float))
    if background.shape[0] == 0 or background.size == 0:
        raise EmptyBackground("background set is empty")
    x = forest.prepare(x)[0]
    background = forest.prepare(background)

    phi = np.zeros((forest.n_classes, forest.n_features))
    for tree in forest.trees:
        phi += tree_shap(tree, x, background)
    phi /= len(forest.trees) * background.shape[0]

    return ShapExplanation(
        base_value=predict_proba(forest, background).mean(axis=0),
        values=phi,
        classes=list(forest.classes),
        feature_names=forest.feature_names,
        instance=instance,
    )


def shap_matrix(forest: Forest, X: np.ndarray, background: np.ndarray, label: int) -> np.ndarray:
    """[n_rows x n_features] attributions toward class `label` for every row of X"""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return np.vstack([shap_values(forest, row, background).for_class(label) for row in X])


def global_shap_importance(
    values: np.ndarray,
    feature_names: Sequence[str],
) -> GlobalImportance:
    """Mean absolute attribution per feature over the rows of a SHAP matrix"""
    values = np.atleast_2d(values)
    if values.shape[1] != len(feature_names):
        raise DimensionMismatch(f"{values.shape[1]} attribution columns for {len(feature_names)} features")
    return GlobalImportance(
        feature_names=list(feature_names),
        importance=np.abs(values).mean(axis=0).tolist(),
    )


def forest_shap_importance(
    forest: Forest,
    X: np.ndarray,
    background: np.ndarray,
    label: Optional[int] = None,
    feature_names: Optional[Sequence[str]] = None,
) -> GlobalImportance:
    """Mean |SHAP| toward `label` (default: the last class) over the rows of X"""
    label = forest.classes[-1] if label is None else int(label)
    names = feature_names or forest.feature_names or [f"x{j}" for j in range(forest.n_features)]
    return global_shap_importance(shap_matrix(forest, X, background, label), names)


def brute_force_shapley(
    model: Callable[[np.ndarray], np.ndarray],
    x: np.ndarray,
    background: np.ndarray,
    features: Optional[Sequence[int]] = None,
) -> np.ndarray:
    """
    Shapley values by enumerating every coalition of `features` (default: all).
    v(S) averages the model over background rows with S taken from x; features outside
    the player set always take x's value. `model` maps [n x M] rows to n outputs.
    """
    x = np.asarray(x, dtype=float)
    background = np.atleast_2d(np.asarray(background, dtype=float))
    if background.shape[0] == 0 or background.size == 0:
        raise EmptyBackground("background set is empty")
    players = list(range(x.shape[0])) if features is None else [int(j) for j in features]
    m = len(players)
    if m > MAX_BRUTE_FORCE_FEATURES:
        raise TooManyFeatures(f"{m} players exceed the brute-force limit of {MAX_BRUTE_FORCE_FEATURES}")

    n_background = background.shape[0]
    hybrids = np.tile(background, (2 ** m, 1))
    outside = [j for j in range(x.shape[0]) if j not in players]
    hybrids[:, outside] = x[outside]
    for mask in range(2 ** m):
        block = slice(mask * n_background, (mask + 1) * n_background)
        for bit, j in enumerate(players):
            if mask >> bit & 1:
                hybrids[block, j] = x[j]
    value = np.asarray(model(hybrids), dtype=float).reshape(2 ** m, n_background).mean(axis=1)

    def weight(size: int) -> float:
        return 1.0 / (m * comb(m - 1, size, exact=True))

    phi = np.zeros(m)
    for mask in range(2 ** m):
        size = bin(mask).count("1")
        for bit in range(m):
            if not mask >> bit & 1:
                phi[bit] += weight(size) * (value[mask | (1 << bit)] - value[mask])

    out = np.zeros(x.shape[0])
    out[players] = phi
    return out
