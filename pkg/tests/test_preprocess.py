import math

import numpy as np
import pytest

from maturity.errors import DuplicateKey, EmptyDataset, SchemaMismatch, WrongScale
from maturity.preprocess.loader import clean_records, load_clean_dataset, load_dataset
from maturity.preprocess.scoring import MaturityLabel, ScoredDataset, compute_composites, score_to_label
from maturity.preprocess.splitting import stratified_split
from maturity.preprocess.statistics import binarized_prevalence, category_distribution, describe, prevalence
from maturity.survey.definition import ResponseRecord, SurveyDefinition
from tests.helpers import make_record, synthetic_records, valid_answers, write_responses


def mini_survey() -> SurveyDefinition:
    """Two Likert items per dimension, so dimension means weigh equally"""
    questions = []
    for section in ("SecurityMeasures", "ThreatPatterns", "AccessControl", "PolicyGaps"):
        for i in range(2):
            questions.append({"id": f"{section.lower()}_{i}", "section": section, "prompt": "", "scale": {"kind": "likert5"}})
    return SurveyDefinition.model_validate({"feature_count": 8, "questions": questions})


def mini_record(survey: SurveyDefinition, row_index: int, values) -> ResponseRecord:
    answers = {q.id: (None if v is None else str(v)) for q, v in zip(survey.questions, values)}
    return ResponseRecord(org_id="ORG", respondent_id=f"R{row_index}", row_index=row_index, answers=answers)


# score_to_label

@pytest.mark.parametrize("score, label", [
    (2.49, MaturityLabel.BASIC),
    (2.5, MaturityLabel.DEVELOPING),
    (3.5, MaturityLabel.DEVELOPING),
    (3.51, MaturityLabel.ADVANCED),
    (None, MaturityLabel.BASIC),
    (float("nan"), MaturityLabel.BASIC),
    (5.0, MaturityLabel.ADVANCED),
    (1.0, MaturityLabel.BASIC),
])
def test_score_to_label_thresholds(score, label):
    assert score_to_label(score) == label


def test_score_to_label_is_monotone():
    scores = np.linspace(1.0, 5.0, 401)
    labels = [score_to_label(float(s)) for s in scores]
    assert labels == sorted(labels)


# loading

def test_load_dataset_keeps_file_order(tmp_path, survey):
    rows = [dict(valid_answers(survey), org_id="ORG-01", respondent_id=f"R{i}") for i in range(5)]
    records = load_dataset(survey, write_responses(tmp_path / "in.csv", survey, rows))
    assert [r.respondent_id for r in records] == [f"R{i}" for i in range(5)]
    assert [r.row_index for r in records] == list(range(5))
    assert records[0].answers["privacy_incidents"] == "None"


def test_header_only_file_is_empty_list_and_empty_after_cleaning(tmp_path, survey):
    path = write_responses(tmp_path / "in.csv", survey, [])
    assert load_dataset(survey, path) == []
    with pytest.raises(EmptyDataset):
        load_clean_dataset(survey, path)


def test_undeclared_question_column_is_schema_mismatch(tmp_path, survey):
    path = write_responses(tmp_path / "in.csv", survey, [])
    text = path.read_text(encoding="utf-8").replace("\n", ",rogue_question\n", 1)
    path.write_text(text, encoding="utf-8")
    with pytest.raises(SchemaMismatch):
        load_dataset(survey, path)


def test_missing_declared_column_is_schema_mismatch(tmp_path, survey):
    path = write_responses(tmp_path / "in.csv", survey, [])
    header = path.read_text(encoding="utf-8").strip().split(",")
    path.write_text(",".join(h for h in header if h != "threat_types") + "\n", encoding="utf-8")
    with pytest.raises(SchemaMismatch):
        load_dataset(survey, path)


def test_duplicate_respondent_reports_row(tmp_path, survey):
    rows = [dict(valid_answers(survey), org_id="ORG-01", respondent_id="R1") for _ in range(2)]
    with pytest.raises(DuplicateKey) as info:
        load_dataset(survey, write_responses(tmp_path / "in.csv", survey, rows))
    assert info.value.row == 1


def test_cleaning_drops_sparse_and_invalid_rows(survey):
    sparse = make_record(survey, row_index=1, **{q: None for q in survey.question_ids[:40]})
    invalid = make_record(survey, row_index=2, ac_least_privilege="7")
    report = clean_records(survey, [make_record(survey, row_index=0), sparse, invalid])
    assert [r.row_index for r in report.kept] == [0]
    assert [d.row_index for d in report.dropped] == [1, 2]
    assert "OutOfScale" in report.dropped[1].reason


def test_single_missing_answer_stays_absent(survey):
    report = clean_records(survey, [make_record(survey, ac_least_privilege=None)])
    assert len(report.kept) == 1


# composites

def test_constant_four_is_advanced(survey):
    dataset = compute_composites(survey, [make_record(survey)])
    assert np.allclose(dataset.composites[0], 4.0)
    assert dataset.labels[0] == MaturityLabel.ADVANCED


def test_overall_is_item_weighted():
    survey = mini_survey()
    dataset = compute_composites(survey, [mini_record(survey, 0, [2, 2, 3, 3, 3, 3, 3, 3])])
    assert dataset.composites[0].tolist() == pytest.approx([2.0, 3.0, 3.0, 3.0, 2.75])
    assert dataset.labels[0] == MaturityLabel.DEVELOPING


def test_absent_items_are_ignored_in_means():
    survey = mini_survey()
    dataset = compute_composites(survey, [mini_record(survey, 0, [2, None, 4, 4, 4, 4, 4, 4])])
    assert dataset.composites[0, 0] == 2.0
    assert dataset.composites[0, 4] == pytest.approx(26 / 7)


def test_dimension_with_no_items_is_absent_and_basic():
    survey = mini_survey()
    dataset = compute_composites(survey, [mini_record(survey, 0, [None, None, 5, 5, 5, 5, 5, 5])])
    assert math.isnan(dataset.composites[0, 0])
    assert dataset.labels[0] == MaturityLabel.BASIC


def test_composites_stay_on_scale(developing_dataset, survey):
    dataset = compute_composites(survey, synthetic_records(developing_dataset, survey))
    assert np.all((dataset.composites >= 1.0) & (dataset.composites <= 5.0))


def test_permuting_rows_permutes_scores():
    survey = mini_survey()
    rng = np.random.default_rng(3)
    records = [mini_record(survey, i, rng.integers(1, 6, size=8).tolist()) for i in range(12)]
    order = rng.permutation(12)
    forward = compute_composites(survey, records)
    shuffled = compute_composites(survey, [records[i] for i in order])
    assert np.allclose(shuffled.composites, forward.composites[order])
    assert np.array_equal(shuffled.labels, forward.labels[order])


def test_scored_dataset_document_round_trip(survey):
    records = [make_record(survey, 0), make_record(survey, 1, ac_least_privilege=None)]
    dataset = compute_composites(survey, records)
    restored = ScoredDataset.from_document(dataset.to_document())
    assert np.array_equal(restored.features, dataset.features, equal_nan=True)
    assert np.array_equal(restored.labels, dataset.labels)
    assert restored.org_index == dataset.org_index


# splitting

def test_split_sixty_rows():
    labels = [2] * 40 + [1] * 20
    split = stratified_split(labels, 0.2, seed=42)
    assert (len(split.train_rows), len(split.test_rows)) == (48, 12)
    test_labels = [labels[i] for i in split.test_rows]
    assert test_labels.count(2) == 8 and test_labels.count(1) == 4
    assert sorted(split.train_rows + split.test_rows) == list(range(60))


def test_split_single_class():
    split = stratified_split([1] * 10, 0.2, seed=0)
    assert (len(split.train_rows), len(split.test_rows)) == (8, 2)


def test_split_is_deterministic_and_seed_dependent():
    labels = [0, 1, 2] * 20
    assert stratified_split(labels, 0.25, 7) == stratified_split(labels, 0.25, 7)
    assert stratified_split(labels, 0.25, 7).test_rows != stratified_split(labels, 0.25, 8).test_rows


def test_single_row_class_stays_in_train():
    labels = [0] * 9 + [1]
    split = stratified_split(labels, 0.2, seed=1)
    assert 9 in split.train_rows
    assert len(split.test_rows) == 2


# statistics

def quota_records(survey):
    """60 respondents: threat type selections 37/28/27/15/8, incidents None for 28"""
    options = survey.question("threat_types").scale.options
    picks = dict(zip(options, (37, 28, 27, 15, 8)))
    incidents = ["None"] * 28 + ["1-2"] * 18 + ["3-5"] * 9 + ["6-10"] * 3 + ["More than 10"] * 2
    records = []
    for i in range(60):
        selected = ";".join(option for option in options if i < picks[option])
        records.append(make_record(survey, i, threat_types=selected, privacy_incidents=incidents[i]))
    return records


def test_threat_type_prevalence(survey):
    shares = prevalence(survey, quota_records(survey), "threat_types")
    assert [round(p, 1) for _, p in shares] == [61.7, 46.7, 45.0, 25.0, 13.3]
    assert shares[0][0] == "Information sharing"


def test_no_selection_is_all_zero(survey):
    shares = prevalence(survey, [make_record(survey, i) for i in range(4)], "threat_types")
    assert all(p == 0.0 for _, p in shares)


def test_incident_share(survey):
    at_least_one, none = binarized_prevalence(survey, quota_records(survey), "privacy_incidents")
    assert round(at_least_one, 1) == 53.3
    assert round(none, 1) == 46.7


def test_category_distribution_follows_label_order(survey):
    shares = category_distribution(survey, quota_records(survey), "privacy_incidents")
    assert [label for label, _ in shares] == ["None", "1-2", "3-5", "6-10", "More than 10"]
    assert sum(p for _, p in shares) == pytest.approx(100.0)


def test_prevalence_needs_multi_select(survey):
    with pytest.raises(WrongScale):
        prevalence(survey, [make_record(survey)], "privacy_incidents")


def test_describe_one_to_five():
    survey = mini_survey()
    dataset = compute_composites(survey, [mini_record(survey, i, [v] * 8) for i, v in enumerate([1, 2, 3, 4, 5])])
    summary = {row.dimension: row for row in describe(dataset)}
    overall = summary["overall"]
    assert overall.count == 5
    assert overall.mean == pytest.approx(3.0)
    assert overall.std == pytest.approx(1.5811, abs=1e-4)
    assert (overall.q25, overall.median, overall.q75) == (2.0, 3.0, 4.0)


def test_describe_constant_column(survey):
    dataset = compute_composites(survey, [make_record(survey, i) for i in range(60)])
    summary = describe(dataset)
    assert all(row.mean == 4.0 and row.std == 0.0 and row.q25 == row.q75 == 4.0 for row in summary)
