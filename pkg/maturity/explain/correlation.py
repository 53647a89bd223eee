from pydantic import BaseModel, ConfigDict
from typing import List, Optional, Sequence
import logging

import numpy as np
from scipy.stats import pearsonr

from maturity.errors import LengthMismatch, TooFewRows, ZeroVariance


logger = logging.getLogger(__name__)


class ImportanceCorrelation(BaseModel):
    model_config = ConfigDict(frozen=True)

    r: float
    p_value: float
    n: int


class ShapCorrelationMatrix(BaseModel):
    """Pearson correlations between per-instance SHAP columns; None where a column is constant"""
    model_config = ConfigDict(frozen=True)

    features: List[str]
    matrix: List[List[Optional[float]]]
    absent: List[str] = []


def importance_correlation(shap: Sequence[float], rf: Sequence[float]) -> ImportanceCorrelation:
    """Pearson r (and two-sided p-value) between SHAP and forest importances"""
    shap = np.asarray(shap, dtype=float)
    rf = np.asarray(rf, dtype=float)
    if shap.shape != rf.shape:
        raise LengthMismatch(f"{shap.size} SHAP importances vs {rf.size} forest importances", stage="explain")
    if shap.size < 3:
        raise TooFewRows(f"correlation needs at least 3 features, got {shap.size}", stage="explain")
    if np.ptp(shap) == 0 or np.ptp(rf) == 0:
        raise ZeroVariance("an importance vector is constant; correlation undefined")

    result = pearsonr(shap, rf)
    r = float(np.clip(result[0], -1.0, 1.0))
    return ImportanceCorrelation(r=r, p_value=float(result[1]), n=int(shap.size))


def top_features(values: np.ndarray, n: int) -> List[int]:
    """Column indices of the n largest mean |SHAP|, feature order on ties"""
    order = np.argsort(-np.abs(values).mean(axis=0), kind="stable")
    return order[:n].tolist()


def shap_correlation_matrix(
    values: np.ndarray,
    feature_names: Sequence[str],
    top_n: Optional[int] = None,
) -> ShapCorrelationMatrix:
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if values.shape[0] < 3:
        raise TooFewRows(f"correlation matrix needs at least 3 instances, got {values.shape[0]}", stage="explain")
    columns = top_features(values, top_n) if top_n else list(range(values.shape[1]))
    names = [feature_names[j] for j in columns]
    block = values[:, columns]

    varying = np.ptp(block, axis=0) > 0
    size = len(columns)
    matrix: List[List[Optional[float]]] = [[None] * size for _ in range(size)]
    live = np.flatnonzero(varying)
    if live.size:
        corr = np.atleast_2d(np.corrcoef(block[:, live], rowvar=False))
        corr = np.clip(0.5 * (corr + corr.T), -1.0, 1.0)
        np.fill_diagonal(corr, 1.0)
        for a, i in enumerate(live):
            for b, j in enumerate(live):
                matrix[i][j] = float(corr[a, b])

    absent = [names[j] for j in range(size) if not varying[j]]
    if absent:
        logger.warning(f"ZeroVariance: constant SHAP columns {absent} left out of the correlation matrix")
    return ShapCorrelationMatrix(features=names, matrix=matrix, absent=absent)
