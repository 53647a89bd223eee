"""
Loading and cleaning raw survey response files
"""
from pydantic import BaseModel, ConfigDict
from typing import List, Tuple, Union
from pathlib import Path
import logging

import pandas as pd

from maturity.errors import DuplicateKey, EmptyDataset, FileUnreadable, SchemaMismatch
from maturity.survey.definition import MultiSelectScale, ResponseRecord, SurveyDefinition
from maturity.survey.recoding import ViolationKind, is_absent, validate_record


logger = logging.getLogger(__name__)

KEY_COLUMNS = ("org_id", "respondent_id")


class DroppedRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    row_index: int
    org_id: str
    respondent_id: str
    reason: str


class CleaningReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    kept: List[ResponseRecord]
    dropped: List[DroppedRow]


def load_dataset(survey: SurveyDefinition, path: Union[str, Path]) -> List[ResponseRecord]:
    """
    Read a UTF-8 response CSV into records, in file order.
    The header must hold org_id, respondent_id and exactly the survey's question ids.
    """
    try:
        # Keep every cell as text: labels such as "None" must not become NaN
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, na_filter=False, encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise SchemaMismatch(f"{path} has no header row")
    except (OSError, UnicodeDecodeError, pd.errors.ParserError) as e:
        raise FileUnreadable(f"Cannot read {path}: {e}")

    header = [column.strip() for column in frame.columns]
    frame.columns = header

    missing_keys = [key for key in KEY_COLUMNS if key not in header]
    if missing_keys:
        raise SchemaMismatch(f"{path} lacks key columns {missing_keys}")

    questions = [column for column in header if column not in KEY_COLUMNS]
    undeclared = [column for column in questions if not survey.has_question(column)]
    if undeclared:
        raise SchemaMismatch(f"{path} has undeclared question columns {undeclared}")
    absent = [qid for qid in survey.question_ids if qid not in questions]
    if absent:
        raise SchemaMismatch(f"{path} lacks declared question columns {absent}")
    if len(set(header)) != len(header):
        raise SchemaMismatch(f"{path} repeats header columns")

    records: List[ResponseRecord] = []
    first_seen = {}
    for row_index, row in enumerate(frame.itertuples(index=False, name=None)):
        values = dict(zip(header, row))
        key = (values["org_id"].strip(), values["respondent_id"].strip())
        if key in first_seen:
            raise DuplicateKey(
                f"respondent {key[1]!r} of organization {key[0]!r} repeats row {first_seen[key]}",
                row=row_index,
            )
        first_seen[key] = row_index

        answers = {qid: (None if is_absent(values[qid]) else values[qid].strip()) for qid in survey.question_ids}
        records.append(ResponseRecord(org_id=key[0], respondent_id=key[1], row_index=row_index, answers=answers))

    logger.info(f"Loaded {len(records)} responses from {path}")
    return records


def missing_fraction(survey: SurveyDefinition, record: ResponseRecord) -> float:
    """Share of scalar questions left unanswered; multi-select questions always count as answered"""
    scalar = [q.id for q in survey.questions if not isinstance(q.scale, MultiSelectScale)]
    if not scalar:
        return 0.0
    unanswered = sum(1 for qid in scalar if is_absent(record.answers.get(qid)))
    return unanswered / len(scalar)


def clean_records(
    survey: SurveyDefinition,
    records: List[ResponseRecord],
    max_missing_fraction: float = 0.5,
) -> CleaningReport:
    """
    Drop rows with invalid answers or too many absent answers.
    Missing answers below the cutoff stay as per-item absences.
    """
    kept: List[ResponseRecord] = []
    dropped: List[DroppedRow] = []

    for record in records:
        reason = _drop_reason(survey, record, max_missing_fraction)
        if reason is None:
            kept.append(record)
            continue
        dropped.append(DroppedRow(
            row_index=record.row_index,
            org_id=record.org_id,
            respondent_id=record.respondent_id,
            reason=reason,
        ))
        logger.warning(f"Dropping row {record.row_index} ({record.org_id}/{record.respondent_id}): {reason}")

    return CleaningReport(kept=kept, dropped=dropped)


def _drop_reason(survey: SurveyDefinition, record: ResponseRecord, max_missing_fraction: float):
    share = missing_fraction(survey, record)
    if share > max_missing_fraction:
        return f"{share:.0%} of answers missing"

    invalid = [v for v in validate_record(survey, record) if v.kind != ViolationKind.MISSING_ANSWER]
    if invalid:
        first = invalid[0]
        return f"{first.kind.value} on {first.question_id}" + (f" ({first.detail})" if first.detail else "")
    return None


def load_clean_dataset(
    survey: SurveyDefinition,
    path: Union[str, Path],
    max_missing_fraction: float = 0.5,
) -> Tuple[List[ResponseRecord], CleaningReport]:
    """Load then clean; an input with nothing left after cleaning is an EmptyDataset"""
    records = load_dataset(survey, path)
    report = clean_records(survey, records, max_missing_fraction)
    if not report.kept:
        raise EmptyDataset(f"no usable responses left in {path} after cleaning", stage="preprocess")
    return report.kept, report
