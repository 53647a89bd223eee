from pydantic import BaseModel, ConfigDict
from typing import List
import logging
import warnings

import numpy as np
from sklearn.model_selection import KFold, StratifiedKFold

from maturity.errors import SingleClass, TooFewRows
from maturity.forest.ensemble import ForestConfig, fit_forest, predict
from maturity.utils.seeding import derive_seed


logger = logging.getLogger(__name__)


class CrossValidationResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    k: int
    scores: List[float]
    fold_sizes: List[int]
    mean: float
    # Population standard deviation over folds
    std: float
    # True when some class has fewer rows than folds
    degraded: bool = False
    # Folds left out because their training part held a single class
    skipped: List[int] = []


def cross_validate(
    X: np.ndarray,
    y: np.ndarray,
    k: int = 5,
    config: ForestConfig = ForestConfig(),
    seed: int = 42,
) -> CrossValidationResult:
    """Stratified k-fold accuracy of freshly fitted forests"""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if k < 2:
        raise TooFewRows(f"cross-validation needs k >= 2, got {k}")
    if y.size < k:
        raise TooFewRows(f"{y.size} rows cannot fill {k} folds")

    _, counts = np.unique(y, return_counts=True)
    degraded = bool(counts.min() < k)
    random_state = seed % (2 ** 32)
    if counts.max() < k:
        logger.warning(f"Every class has fewer than {k} rows; falling back to unstratified folds")
        splitter = KFold(n_splits=k, shuffle=True, random_state=random_state)
    else:
        if degraded:
            logger.warning(f"Smallest class has {counts.min()} rows < k={k}; stratification is degraded")
        splitter = StratifiedKFold(n_splits=k, shuffle=True, random_state=random_state)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        folds = list(splitter.split(X, y))

    scores: List[float] = []
    fold_sizes: List[int] = []
    skipped: List[int] = []
    for fold, (train, test) in enumerate(folds):
        try:
            forest = fit_forest(X[train], y[train], config, derive_seed(seed, fold))
        except SingleClass:
            logger.warning(f"Fold {fold}: training part holds a single class; fold skipped")
            skipped.append(fold)
            continue
        scores.append(float(np.mean(predict(forest, X[test]) == y[test])))
        fold_sizes.append(int(test.size))
        logger.debug(f"Fold {fold}: accuracy {scores[-1]:.4f} on {test.size} rows")

    if not scores:
        raise TooFewRows(f"every one of the {k} folds trained on a single class")

    result = CrossValidationResult(
        k=k,
        scores=scores,
        fold_sizes=fold_sizes,
        mean=float(np.mean(scores)),
        std=float(np.std(scores)),
        degraded=degraded,
        skipped=skipped,
    )
    logger.info(f"{k}-fold CV accuracy {result.mean:.3f} (+/- {result.std:.3f})")
    return result
