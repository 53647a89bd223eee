"""
Descriptive statistics: prevalence of multi-select options, category shares and
per-dimension summaries.
"""
from pydantic import BaseModel, ConfigDict
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd

from maturity.errors import EmptyDataset, MaturityError, WrongScale
from maturity.preprocess.scoring import COMPOSITE_COLUMNS, ScoredDataset
from maturity.survey.definition import CountScale, MultiSelectScale, OrdinalRangeScale, ResponseRecord, SurveyDefinition
from maturity.survey.recoding import is_absent, parse_selection, recode


class DimensionSummary(BaseModel):
    model_config = ConfigDict(frozen=True)

    dimension: str
    count: int
    mean: Optional[float]
    std: Optional[float]
    min: Optional[float]
    q25: Optional[float]
    median: Optional[float]
    q75: Optional[float]
    max: Optional[float]


def prevalence(survey: SurveyDefinition, records: List[ResponseRecord], question_id: str) -> List[Tuple[str, float]]:
    """Percentage of respondents selecting each option, highest first (declared order on ties)"""
    question = survey.question(question_id)
    if not isinstance(question.scale, MultiSelectScale):
        raise WrongScale(f"{question_id} is not a multi-select question")
    if not records:
        raise EmptyDataset("no records for prevalence")

    options = question.scale.options
    counts = dict.fromkeys(options, 0)
    for record in records:
        try:
            selected = set(parse_selection(question.scale, record.answers.get(question_id)))
        except MaturityError as e:
            e.row = record.row_index
            raise
        for option in selected:
            counts[option] += 1

    total = len(records)
    shares = [(option, 100.0 * counts[option] / total) for option in options]
    return sorted(shares, key=lambda item: -item[1])


def binarized_prevalence(
    survey: SurveyDefinition,
    records: List[ResponseRecord],
    question_id: str,
    at_least: float = 1.0,
) -> Tuple[float, float]:
    """
    Share of answering respondents whose recoded value is >= `at_least`, and the
    complementary share. Used for the "at least one incident" split.
    """
    question = survey.question(question_id)
    if not isinstance(question.scale, (OrdinalRangeScale, CountScale)):
        raise WrongScale(f"{question_id} is neither an ordinal range nor a count question")

    values = [recode(question.scale, r.answers[question_id]) for r in records if not is_absent(r.answers.get(question_id))]
    if not values:
        raise EmptyDataset(f"nobody answered {question_id}")
    above = 100.0 * sum(1 for v in values if v >= at_least) / len(values)
    return above, 100.0 - above


def category_distribution(
    survey: SurveyDefinition,
    records: List[ResponseRecord],
    question_id: str,
) -> List[Tuple[str, float]]:
    """Percentage of answering respondents per ordinal label, in declared label order"""
    question = survey.question(question_id)
    if not isinstance(question.scale, OrdinalRangeScale):
        raise WrongScale(f"{question_id} is not an ordinal range question")

    answers = [r.answers[question_id] for r in records if not is_absent(r.answers.get(question_id))]
    if not answers:
        raise EmptyDataset(f"nobody answered {question_id}")
    labels = question.scale.recode.labels
    return [(label, 100.0 * answers.count(label) / len(answers)) for label in labels]


def describe(dataset: ScoredDataset) -> List[DimensionSummary]:
    """Count, mean, sample std, min, linear-interpolated quartiles and max per composite"""
    if len(dataset) == 0:
        raise EmptyDataset("cannot describe an empty dataset")

    frame = pd.DataFrame(dataset.composites, columns=list(COMPOSITE_COLUMNS))
    summary = frame.describe(percentiles=[0.25, 0.5, 0.75])

    out: List[DimensionSummary] = []
    for column in COMPOSITE_COLUMNS:
        stats = summary[column]
        count = int(stats["count"])

        def value(key: str) -> Optional[float]:
            v = float(stats[key])
            return None if np.isnan(v) else v

        std = value("std")
        if count == 1:
            std = None
        out.append(DimensionSummary(
            dimension=column,
            count=count,
            mean=value("mean"),
            std=std,
            min=value("min"),
            q25=value("25%"),
            median=value("50%"),
            q75=value("75%"),
            max=value("max"),
        ))
    return out
