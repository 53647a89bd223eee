"""
Deterministic recoding of raw answers into numeric features
"""
from pydantic import BaseModel, ConfigDict
from typing import List, Optional
from enum import Enum
import math

import numpy as np

from maturity.errors import MaturityError, OutOfScale, UnknownLabel, WrongScale
from maturity.survey.definition import (
    CountScale,
    Likert5Scale,
    MultiSelectScale,
    OrdinalRangeScale,
    QuestionSpec,
    ResponseRecord,
    SurveyDefinition,
)


LIKERT_MIN = 1
LIKERT_MAX = 5
MULTI_SELECT_SEPARATOR = ";"


class ViolationKind(str, Enum):
    MISSING_ANSWER = "MissingAnswer"
    UNKNOWN_LABEL = "UnknownLabel"
    OUT_OF_SCALE = "OutOfScale"
    UNKNOWN_QUESTION = "UnknownQuestion"


class Violation(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: ViolationKind
    question_id: str
    detail: str = ""


def is_absent(raw: Optional[str]) -> bool:
    return raw is None or raw.strip() == ""


def _parse_integer(raw: str) -> int:
    text = raw.strip()
    try:
        return int(text)
    except ValueError:
        pass
    try:
        value = float(text)
    except ValueError:
        raise UnknownLabel(f"'{raw}' is not a number")
    if not math.isfinite(value) or not value.is_integer():
        raise OutOfScale(f"'{raw}' is not a whole number")
    return int(value)


def recode(scale, raw: str) -> float:
    """
    Map one raw answer onto its numeric value.
    Likert and count answers are parsed as integers; ordinal ranges go through their recode map.
    """
    if isinstance(scale, Likert5Scale):
        value = _parse_integer(raw)
        if not LIKERT_MIN <= value <= LIKERT_MAX:
            raise OutOfScale(f"Likert value {value} outside [{LIKERT_MIN},{LIKERT_MAX}]")
        return float(value)

    if isinstance(scale, OrdinalRangeScale):
        return scale.recode.value_for(raw.strip())

    if isinstance(scale, CountScale):
        value = _parse_integer(raw)
        if value < 0:
            raise OutOfScale(f"count {value} is negative")
        return float(value)

    raise WrongScale(f"{type(scale).__name__} answers do not recode to a single value")


def parse_selection(scale: MultiSelectScale, raw: Optional[str]) -> List[str]:
    """Selected options of a multi-select answer; an empty cell selects nothing"""
    if is_absent(raw):
        return []
    selected = [part.strip() for part in raw.split(MULTI_SELECT_SEPARATOR) if part.strip()]
    unknown = [option for option in selected if option not in scale.options]
    if unknown:
        raise UnknownLabel(f"options {unknown} are not among {scale.options}")
    return selected


def encode_answer(question: QuestionSpec, raw: Optional[str]) -> List[float]:
    """Numeric feature values for one answer; NaN marks an absent value"""
    if isinstance(question.scale, MultiSelectScale):
        selected = set(parse_selection(question.scale, raw))
        return [1.0 if option in selected else 0.0 for option in question.scale.options]

    if is_absent(raw):
        return [math.nan]
    return [recode(question.scale, raw)]


def encode_record(survey: SurveyDefinition, record: ResponseRecord) -> np.ndarray:
    """Feature row of one validated record, in survey feature order"""
    row: List[float] = []
    for question in survey.questions:
        try:
            row.extend(encode_answer(question, record.answers.get(question.id)))
        except MaturityError as e:
            e.row = record.row_index
            raise
    return np.asarray(row, dtype=float)


def validate_record(survey: SurveyDefinition, record: ResponseRecord) -> List[Violation]:
    """Every problem with a record, in survey question order; empty when the record is clean"""
    violations: List[Violation] = []

    for question in survey.questions:
        raw = record.answers.get(question.id)
        if isinstance(question.scale, MultiSelectScale):
            try:
                parse_selection(question.scale, raw)
            except UnknownLabel as e:
                violations.append(Violation(kind=ViolationKind.UNKNOWN_LABEL, question_id=question.id, detail=e.message))
            continue

        if is_absent(raw):
            if question.required:
                violations.append(Violation(kind=ViolationKind.MISSING_ANSWER, question_id=question.id))
            continue

        try:
            recode(question.scale, raw)
        except UnknownLabel as e:
            violations.append(Violation(kind=ViolationKind.UNKNOWN_LABEL, question_id=question.id, detail=e.message))
        except OutOfScale as e:
            violations.append(Violation(kind=ViolationKind.OUT_OF_SCALE, question_id=question.id, detail=e.message))

    for question_id in sorted(set(record.answers) - set(survey.question_ids)):
        violations.append(Violation(kind=ViolationKind.UNKNOWN_QUESTION, question_id=question_id))

    return violations
