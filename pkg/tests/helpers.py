from pathlib import Path
from typing import Dict, List, Optional
import csv

from maturity.config import PACKAGE_ROOT
from maturity.survey.definition import (
    CountScale,
    MultiSelectScale,
    OrdinalRangeScale,
    ResponseRecord,
    SurveyDefinition,
)


SCENARIO_DIR = PACKAGE_ROOT / "data" / "scenarios"
FIXTURE_DIR = PACKAGE_ROOT / "data" / "fixtures"
DEVELOPING_SCENARIO = SCENARIO_DIR / "developing_dominant.yaml"


def valid_answers(survey: SurveyDefinition, likert: str = "4") -> Dict[str, Optional[str]]:
    """A complete, valid answer set: every Likert item at `likert`"""
    answers: Dict[str, Optional[str]] = {}
    for question in survey.questions:
        if isinstance(question.scale, MultiSelectScale):
            answers[question.id] = ""
        elif isinstance(question.scale, OrdinalRangeScale):
            answers[question.id] = question.scale.recode.labels[0]
        elif isinstance(question.scale, CountScale):
            answers[question.id] = "2"
        else:
            answers[question.id] = likert
    return answers


def make_record(survey: SurveyDefinition, row_index: int = 0, org_id: str = "ORG-01", **overrides) -> ResponseRecord:
    answers = valid_answers(survey)
    answers.update(overrides)
    return ResponseRecord(org_id=org_id, respondent_id=f"R{row_index + 1:03d}", row_index=row_index, answers=answers)


def write_responses(path: Path, survey: SurveyDefinition, rows: List[Dict[str, str]]) -> Path:
    """Write rows (org_id, respondent_id plus answers) as a response CSV in survey column order"""
    columns = ["org_id", "respondent_id"] + survey.question_ids
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({column: row.get(column) or "" for column in columns})
    return path


def synthetic_records(dataset, survey: SurveyDefinition) -> List[ResponseRecord]:
    """Response records for the rows of a SyntheticDataset, empty cells absent"""
    return [
        ResponseRecord(
            org_id=row["org_id"],
            respondent_id=row["respondent_id"],
            row_index=i,
            answers={qid: (row[qid] or None) for qid in survey.question_ids},
        )
        for i, row in enumerate(dataset.rows)
    ]
