"""
Classification metrics over maturity labels: confusion matrix, per-class
precision/recall/F1, accuracy, macro averages and Cohen's kappa.
"""
from pydantic import BaseModel, ConfigDict
from typing import List, Optional, Sequence
import logging
import math

import numpy as np
from sklearn.metrics import accuracy_score, cohen_kappa_score, confusion_matrix, precision_recall_fscore_support

from maturity.errors import LengthMismatch
from maturity.preprocess.scoring import MaturityLabel


logger = logging.getLogger(__name__)


class ConfusionMatrix(BaseModel):
    """Rows are actual labels, columns predicted, in maturity order"""
    model_config = ConfigDict(frozen=True)

    labels: List[str]
    counts: List[List[int]]
    # Maturity labels seen in neither y_true nor y_pred
    dropped: List[str] = []

    @property
    def total(self) -> int:
        return int(sum(sum(row) for row in self.counts))


class ClassMetrics(BaseModel):
    model_config = ConfigDict(frozen=True)

    label: str
    precision: float
    recall: float
    f1: float
    support: int
    # Zero denominators are reported as 0 and flagged here
    precision_undefined: bool = False
    recall_undefined: bool = False


class MetricsReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    confusion: ConfusionMatrix
    per_class: List[ClassMetrics]
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    kappa: Optional[float]
    n: int
    cv_mean: Optional[float] = None
    cv_std: Optional[float] = None
    cv_scores: Optional[List[float]] = None
    cv_degraded: bool = False
    oob_accuracy: Optional[float] = None

    def for_label(self, label: str) -> ClassMetrics:
        return next(m for m in self.per_class if m.label == label)


def evaluate(y_true: Sequence[int], y_pred: Sequence[int]) -> MetricsReport:
    y_true = np.asarray(y_true, dtype=int)
    y_pred = np.asarray(y_pred, dtype=int)
    if y_true.shape != y_pred.shape:
        raise LengthMismatch(f"{y_true.size} actual labels vs {y_pred.size} predictions")
    if y_true.size == 0:
        raise LengthMismatch("cannot evaluate zero predictions")

    observed = set(y_true.tolist()) | set(y_pred.tolist())
    present = [int(label) for label in MaturityLabel if int(label) in observed]
    dropped = [label.display for label in MaturityLabel if int(label) not in observed]
    names = [MaturityLabel(label).display for label in present]

    counts = confusion_matrix(y_true, y_pred, labels=present)
    precision, recall, f1, support = precision_recall_fscore_support(
        y_true, y_pred, labels=present, zero_division=0
    )
    predicted_totals = counts.sum(axis=0)

    per_class = []
    for j, name in enumerate(names):
        per_class.append(ClassMetrics(
            label=name,
            precision=float(precision[j]),
            recall=float(recall[j]),
            f1=float(f1[j]),
            support=int(support[j]),
            precision_undefined=bool(predicted_totals[j] == 0),
            recall_undefined=bool(support[j] == 0),
        ))
        if predicted_totals[j] == 0 or support[j] == 0:
            logger.warning(f"{name}: zero denominator in precision or recall, reported as 0")

    kappa = float(cohen_kappa_score(y_true, y_pred, labels=present))
    if math.isnan(kappa):
        logger.warning("Cohen's kappa undefined: chance agreement is 1 with a single observed class")
        kappa = None

    return MetricsReport(
        confusion=ConfusionMatrix(labels=names, counts=counts.tolist(), dropped=dropped),
        per_class=per_class,
        accuracy=float(accuracy_score(y_true, y_pred)),
        macro_precision=float(np.mean(precision)),
        macro_recall=float(np.mean(recall)),
        macro_f1=float(np.mean(f1)),
        kappa=kappa,
        n=int(y_true.size),
    )
