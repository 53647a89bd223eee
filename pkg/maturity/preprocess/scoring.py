"""
Composite dimension scores and threshold maturity labels
"""
from pydantic import BaseModel, ConfigDict, model_validator
from typing import Any, Dict, List, Optional, Tuple
from enum import IntEnum
import logging
import math

import numpy as np

from maturity.errors import DataError, EmptyDataset
from maturity.survey.definition import DIMENSIONS, ResponseRecord, SurveyDefinition
from maturity.survey.recoding import encode_record


logger = logging.getLogger(__name__)

COMPOSITE_COLUMNS = DIMENSIONS + ("overall",)
HMM_STATE_FEATURE = "hmm_state"


class MaturityLabel(IntEnum):
    BASIC = 0
    DEVELOPING = 1
    ADVANCED = 2

    @property
    def display(self) -> str:
        return self.name.capitalize()

    @classmethod
    def from_display(cls, name: str) -> "MaturityLabel":
        return cls[name.upper()]


class CompositeScores(BaseModel):
    model_config = ConfigDict(frozen=True)

    security_maturity: Optional[float]
    threat_awareness: Optional[float]
    access_control: Optional[float]
    policy_framework: Optional[float]
    overall: Optional[float]


def score_to_label(score: Optional[float], basic_upper: float = 2.5, advanced_lower: float = 3.5) -> MaturityLabel:
    """Threshold rule: absent or < 2.5 Basic, [2.5, 3.5] Developing, > 3.5 Advanced"""
    if score is None or math.isnan(score) or score < basic_upper:
        return MaturityLabel.BASIC
    if score <= advanced_lower:
        return MaturityLabel.DEVELOPING
    return MaturityLabel.ADVANCED


class ScoredDataset(BaseModel):
    """Numeric feature matrix plus per-respondent composites and labels (NaN = absent)"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    feature_names: List[str]
    features: np.ndarray
    composites: np.ndarray
    labels: np.ndarray
    org_index: List[str]
    respondent_ids: List[str]
    row_index: List[int]
    # Decoded maturity label per respondent, -1 where the HMM saw no observation
    hmm_states: Optional[np.ndarray] = None

    @model_validator(mode="after")
    def check_alignment(self):
        n = self.features.shape[0]
        if self.features.ndim != 2 or self.features.shape[1] != len(self.feature_names):
            raise ValueError("features must be a [n x len(feature_names)] matrix")
        if self.composites.shape != (n, len(COMPOSITE_COLUMNS)):
            raise ValueError("composites must align with feature rows")
        if len(self.labels) != n or len(self.org_index) != n or len(self.respondent_ids) != n or len(self.row_index) != n:
            raise ValueError("labels and keys must align with feature rows")
        if self.hmm_states is not None and len(self.hmm_states) != n:
            raise ValueError("hmm_states must align with feature rows")
        return self

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def organizations(self) -> List[str]:
        """Organization keys in order of first appearance"""
        return list(dict.fromkeys(self.org_index))

    def composite_scores(self, row: int) -> CompositeScores:
        values = {name: _optional(self.composites[row, j]) for j, name in enumerate(COMPOSITE_COLUMNS)}
        return CompositeScores(**values)

    def dimension_matrix(self) -> np.ndarray:
        """[n x 4] composite dimension scores, without the overall column"""
        return self.composites[:, : len(DIMENSIONS)]

    def with_hmm_states(self, hmm_states: np.ndarray) -> "ScoredDataset":
        return self.model_copy(update={"hmm_states": np.asarray(hmm_states, dtype=int)})

    def model_matrix(self, include_hmm_state: bool) -> Tuple[np.ndarray, List[str]]:
        """Forest input: survey features, optionally followed by the decoded HMM state"""
        if not include_hmm_state:
            return self.features, list(self.feature_names)
        if self.hmm_states is None:
            raise DataError("dataset carries no HMM states", stage="forest")
        states = np.where(self.hmm_states < 0, np.nan, self.hmm_states.astype(float))
        return np.column_stack([self.features, states]), list(self.feature_names) + [HMM_STATE_FEATURE]

    def to_document(self) -> Dict[str, Any]:
        return {
            "feature_names": list(self.feature_names),
            "composite_names": list(COMPOSITE_COLUMNS),
            "rows": [
                {
                    "org_id": self.org_index[i],
                    "respondent_id": self.respondent_ids[i],
                    "row_index": int(self.row_index[i]),
                    "features": [_optional(v) for v in self.features[i]],
                    "composites": [_optional(v) for v in self.composites[i]],
                    "label": MaturityLabel(int(self.labels[i])).display,
                    "hmm_state": (
                        None if self.hmm_states is None or self.hmm_states[i] < 0
                        else MaturityLabel(int(self.hmm_states[i])).display
                    ),
                }
                for i in range(len(self))
            ],
        }

    @classmethod
    def from_document(cls, document: Dict[str, Any]) -> "ScoredDataset":
        rows = document["rows"]
        feature_names = list(document["feature_names"])
        if not rows:
            raise EmptyDataset("scored dataset has no rows")

        def matrix(key: str, width: int) -> np.ndarray:
            out = np.array([[np.nan if v is None else float(v) for v in row[key]] for row in rows], dtype=float)
            return out.reshape(len(rows), width)

        states = [row.get("hmm_state") for row in rows]
        hmm_states = None
        if any(state is not None for state in states):
            hmm_states = np.array([-1 if s is None else int(MaturityLabel.from_display(s)) for s in states], dtype=int)

        return cls(
            feature_names=feature_names,
            features=matrix("features", len(feature_names)),
            composites=matrix("composites", len(COMPOSITE_COLUMNS)),
            labels=np.array([int(MaturityLabel.from_display(row["label"])) for row in rows], dtype=int),
            org_index=[row["org_id"] for row in rows],
            respondent_ids=[row["respondent_id"] for row in rows],
            row_index=[int(row["row_index"]) for row in rows],
            hmm_states=hmm_states,
        )


def _optional(value: float) -> Optional[float]:
    value = float(value)
    return None if math.isnan(value) else value


def compute_composites(
    survey: SurveyDefinition,
    records: List[ResponseRecord],
    basic_upper: float = 2.5,
    advanced_lower: float = 3.5,
) -> ScoredDataset:
    """
    Encode validated records and score each respondent.

    Each dimension is the mean of its present Likert items; overall is the mean over
    every present contributing item (item-weighted). A respondent with an empty
    dimension keeps that dimension absent and is labelled Basic.
    """
    if not records:
        raise EmptyDataset("no records to score")

    names = survey.feature_names
    position = {name: j for j, name in enumerate(names)}
    dimension_columns = [[position[qid] for qid in survey.dimension_items(d)] for d in DIMENSIONS]
    all_columns = [j for columns in dimension_columns for j in columns]

    features = np.vstack([encode_record(survey, record) for record in records])
    composites = np.full((len(records), len(COMPOSITE_COLUMNS)), np.nan)
    labels = np.zeros(len(records), dtype=int)

    for i, record in enumerate(records):
        any_absent = False
        for d, columns in enumerate(dimension_columns):
            items = features[i, columns]
            items = items[~np.isnan(items)]
            if items.size == 0:
                any_absent = True
                logger.warning(
                    f"AllItemsMissing: row {record.row_index} has no {DIMENSIONS[d]} items; dimension left absent"
                )
                continue
            composites[i, d] = items.mean()

        pooled = features[i, all_columns]
        pooled = pooled[~np.isnan(pooled)]
        if pooled.size:
            composites[i, -1] = pooled.mean()

        overall = None if any_absent else _optional(composites[i, -1])
        labels[i] = int(score_to_label(overall, basic_upper, advanced_lower))

    return ScoredDataset(
        feature_names=names,
        features=features,
        composites=composites,
        labels=labels,
        org_index=[record.org_id for record in records],
        respondent_ids=[record.respondent_id for record in records],
        row_index=[record.row_index for record in records],
    )
