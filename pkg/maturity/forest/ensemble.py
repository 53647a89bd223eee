"""
Random Forest classifier: bootstrap samples, sqrt(M) feature subsampling, balanced
class weights and per-tree seeds derived from one master seed.
"""
from pydantic import BaseModel, ConfigDict
from typing import Any, Dict, List, Optional
import logging
import math

import numpy as np

from maturity.errors import DimensionMismatch, EmptyData, SingleClass
from maturity.forest.tree import DecisionTree, grow_tree
from maturity.utils.seeding import make_rng


logger = logging.getLogger(__name__)


class ForestConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_trees: int = 100
    max_depth: int = 10
    min_samples_leaf: int = 1
    # None -> floor(sqrt(n_features))
    max_features: Optional[int] = None


class Forest(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    hyperparams: ForestConfig
    seed: int
    classes: List[int]
    class_weights: List[float]
    medians: List[float]
    trees: List[DecisionTree]
    oob_indices: List[List[int]]
    feature_names: Optional[List[str]] = None

    @property
    def n_features(self) -> int:
        return len(self.medians)

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def prepare(self, X: np.ndarray) -> np.ndarray:
        """Check dimensionality and impute absent values with the training medians"""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got {X.shape[1]}")
        missing = np.isnan(X)
        if np.any(missing):
            X = np.where(missing, np.asarray(self.medians)[None, :], X)
        return X

    def class_index(self, label: int) -> int:
        return self.classes.index(int(label))

    def to_document(self) -> Dict[str, Any]:
        return {
            "config": self.hyperparams.model_dump(),
            "seed": self.seed,
            "classes": list(self.classes),
            "class_weights": list(self.class_weights),
            "medians": list(self.medians),
            "feature_names": self.feature_names,
            "oob_indices": self.oob_indices,
            "trees": [tree.to_nested() for tree in self.trees],
        }

    @classmethod
    def from_document(cls, document: Dict[str, Any]) -> "Forest":
        n_features = len(document["medians"])
        return cls(
            hyperparams=ForestConfig(**document["config"]),
            seed=int(document["seed"]),
            classes=[int(c) for c in document["classes"]],
            class_weights=[float(w) for w in document["class_weights"]],
            medians=[float(m) for m in document["medians"]],
            trees=[DecisionTree.from_nested(tree, n_features) for tree in document["trees"]],
            oob_indices=[[int(i) for i in rows] for rows in document["oob_indices"]],
            feature_names=document.get("feature_names"),
        )


def balanced_class_weights(y: np.ndarray, classes: np.ndarray) -> np.ndarray:
    """n / (n_classes * count) per class"""
    counts = np.array([np.sum(y == c) for c in classes], dtype=float)
    return y.size / (classes.size * counts)


def fit_forest(
    X: np.ndarray,
    y: np.ndarray,
    config: ForestConfig = ForestConfig(),
    seed: int = 42,
    feature_names: Optional[List[str]] = None,
) -> Forest:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if X.ndim != 2 or X.shape[0] < 2:
        raise EmptyData(f"need at least 2 training rows, got {X.shape[0] if X.ndim == 2 else 0}")
    if y.shape[0] != X.shape[0]:
        raise DimensionMismatch(f"{X.shape[0]} rows but {y.shape[0]} labels")
    classes = np.unique(y)
    if classes.size < 2:
        raise SingleClass(f"only class {classes.tolist()} present in training labels")
    if feature_names is not None and len(feature_names) != X.shape[1]:
        raise DimensionMismatch(f"{len(feature_names)} feature names for {X.shape[1]} columns")

    medians = np.nanmedian(np.where(np.isnan(X).all(axis=0)[None, :], 0.0, X), axis=0)
    X = np.where(np.isnan(X), medians[None, :], X)

    encoded = np.searchsorted(classes, y)
    class_weights = balanced_class_weights(y, classes)
    row_weight = class_weights[encoded]
    max_features = config.max_features or max(1, int(math.floor(math.sqrt(X.shape[1]))))
    n = X.shape[0]

    trees: List[DecisionTree] = []
    oob_indices: List[List[int]] = []
    for i in range(config.n_trees):
        rng = make_rng(seed, i)
        draws = rng.integers(0, n, size=n)
        multiplicity = np.bincount(draws, minlength=n).astype(float)
        trees.append(grow_tree(
            X,
            encoded,
            multiplicity * row_weight,
            classes.size,
            rng,
            max_depth=config.max_depth,
            min_samples_leaf=config.min_samples_leaf,
            max_features=max_features,
        ))
        oob_indices.append(np.flatnonzero(multiplicity == 0).tolist())

    logger.info(f"Fitted forest: {config.n_trees} trees on {n} rows x {X.shape[1]} features")
    return Forest(
        hyperparams=config,
        seed=seed,
        classes=classes.tolist(),
        class_weights=class_weights.tolist(),
        medians=medians.tolist(),
        trees=trees,
        oob_indices=oob_indices,
        feature_names=feature_names,
    )


def predict_proba(forest: Forest, X: np.ndarray) -> np.ndarray:
    """Mean of normalized leaf class distributions over trees, in tree order; columns follow forest.classes"""
    X = forest.prepare(X)
    proba = np.zeros((X.shape[0], forest.n_classes))
    for tree in forest.trees:
        proba += tree.predict_proba(X)
    proba /= len(forest.trees)
    return proba / proba.sum(axis=1, keepdims=True)


def predict(forest: Forest, X: np.ndarray) -> np.ndarray:
    """Class labels; argmax ties go to the lower class"""
    return np.asarray(forest.classes)[np.argmax(predict_proba(forest, X), axis=1)]


def feature_importance(forest: Forest) -> np.ndarray:
    """Mean decrease in weighted Gini impurity, normalized per tree, averaged and renormalized.

    A forest of unsplit trees spreads importance uniformly.
    """
    total = np.zeros(forest.n_features)
    contributing = 0
    for tree in forest.trees:
        decrease = tree.impurity_decrease()
        mass = decrease.sum()
        if mass > 0:
            total += decrease / mass
            contributing += 1
    if contributing == 0:
        return np.full(forest.n_features, 1.0 / forest.n_features)
    total /= contributing
    return total / total.sum()


def oob_score(forest: Forest, X: np.ndarray, y: np.ndarray) -> Optional[float]:
    """Accuracy on training rows scored only by trees that never drew them"""
    X = forest.prepare(X)
    y = np.asarray(y, dtype=int)
    proba = np.zeros((X.shape[0], forest.n_classes))
    votes = np.zeros(X.shape[0], dtype=int)
    for tree, rows in zip(forest.trees, forest.oob_indices):
        if not rows:
            continue
        proba[rows] += tree.predict_proba(X[rows])
        votes[rows] += 1

    scored = votes > 0
    if not np.any(scored):
        logger.warning("No out-of-bag rows; OOB accuracy unavailable")
        return None
    predicted = np.asarray(forest.classes)[np.argmax(proba[scored], axis=1)]
    return float(np.mean(predicted == y[scored]))
