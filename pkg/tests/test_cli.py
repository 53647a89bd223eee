import json

import pytest
from jsonschema import Draft202012Validator

from maturity.main import main
from maturity.report.schema import ASSESSMENT_SCHEMA
from maturity.store.artifacts import DATASET_JSON, FOREST_JSON, HMM_JSON, REPORT_JSON, REPORT_TEXT
from tests.helpers import DEVELOPING_SCENARIO, valid_answers, write_responses


FAST_CONFIG = """\
[hmm]
n_restarts = 3

[forest]
n_trees = 25
cv_folds = 3

[explain]
background_size = 30
lime_samples = 200
"""


@pytest.fixture(scope="session")
def fast_config(tmp_path_factory):
    path = tmp_path_factory.mktemp("config") / "fast.ini"
    path.write_text(FAST_CONFIG, encoding="utf-8")
    return str(path)


@pytest.fixture(scope="session")
def assessed(tmp_path_factory, developing_csv, fast_config):
    out = tmp_path_factory.mktemp("assess")
    assert main(["assess", "--in", str(developing_csv), "--out", str(out), "--config", fast_config]) == 0
    return out


def read_report(directory):
    return json.loads((directory / REPORT_JSON).read_text(encoding="utf-8"))


@pytest.mark.slow
def test_assess_finds_developing_organizations(assessed):
    organizations = read_report(assessed)["hmm"]["organizations"]
    assert [org["org_id"] for org in organizations] == ["ORG-01", "ORG-02", "ORG-03"]
    for org in organizations:
        assert org["dominant"] == "Developing"
        assert org["confidence"] >= 0.9
        assert sum(org["state_counts"]) == org["n_observations"] == 20


@pytest.mark.slow
def test_assess_writes_every_artifact(assessed):
    for name in (REPORT_JSON, REPORT_TEXT, DATASET_JSON, HMM_JSON, FOREST_JSON):
        assert (assessed / name).is_file()
    report = read_report(assessed)
    assert report["metadata"]["command"] == "assess"
    assert report["cleaning"]["n_kept"] == 60
    assert len(report["validation"]["feature_ranking"]) == 10
    assert report["validation"]["n_features"] == 64
    assert len(report["explanation"]["lime"]) == 3
    assert "Hidden Markov model" in (assessed / REPORT_TEXT).read_text(encoding="utf-8")


@pytest.mark.slow
def test_assess_report_validates_against_shipped_schema(assessed):
    schema = json.loads(ASSESSMENT_SCHEMA.read_text(encoding="utf-8"))
    errors = list(Draft202012Validator(schema).iter_errors(read_report(assessed)))
    assert errors == []


@pytest.mark.slow
def test_assess_is_reproducible(tmp_path, assessed, developing_csv, fast_config):
    assert main(["assess", "--in", str(developing_csv), "--out", str(tmp_path), "--config", fast_config]) == 0
    for name in (REPORT_JSON, FOREST_JSON, HMM_JSON):
        assert (tmp_path / name).read_bytes() == (assessed / name).read_bytes()


@pytest.mark.slow
def test_validate_reports_requested_top_features(capsys, assessed, fast_config):
    scored = assessed / DATASET_JSON
    assert main(["validate", "--in", str(scored), "--config", fast_config, "--top", "5"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert len(report["validation"]["feature_ranking"]) == 5
    assert report["validation"]["n_features"] == 64
    assert 0.0 <= report["validation"]["metrics"]["accuracy"] <= 1.0


@pytest.mark.slow
def test_validate_flags_classes_smaller_than_folds(capsys, tmp_path, assessed, fast_config):
    document = json.loads((assessed / DATASET_JSON).read_text(encoding="utf-8"))
    for i, row in enumerate(document["rows"]):
        row["label"] = "Developing" if i < 2 else "Advanced"
    relabelled = tmp_path / DATASET_JSON
    relabelled.write_text(json.dumps(document), encoding="utf-8")

    assert main(["validate", "--in", str(relabelled), "--config", fast_config]) == 0
    metrics = json.loads(capsys.readouterr().out)["validation"]["metrics"]
    assert metrics["cv_degraded"] is True
    assert metrics["cv_mean"] is not None


@pytest.mark.slow
def test_validate_text_format(capsys, assessed, fast_config):
    assert main(["validate", "--in", str(assessed / DATASET_JSON), "--config", fast_config, "--format", "text"]) == 0
    assert "Random forest" in capsys.readouterr().out


@pytest.mark.slow
def test_explain_organization(capsys, assessed, fast_config):
    args = ["explain", "--in", str(assessed / DATASET_JSON), "--model", str(assessed),
            "--config", fast_config, "--select", "org:ORG-01"]
    assert main(args) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["selector"] == "org:ORG-01"
    assert len(report["instances"]) == 20
    for instance in report["instances"]:
        assert instance["org_id"] == "ORG-01"
        assert instance["base_value"] + sum(instance["values"]) == pytest.approx(instance["output"], abs=1e-9)
        assert 0.0 <= instance["output"] <= 1.0
        assert len(instance["top"]) == 10


@pytest.mark.slow
@pytest.mark.parametrize("selector", ["team:ORG-01", "org:ORG-99", "row:abc", "row:500"])
def test_explain_unknown_selector_is_usage_error(assessed, fast_config, selector):
    args = ["explain", "--in", str(assessed / DATASET_JSON), "--model", str(assessed),
            "--config", fast_config, "--select", selector]
    assert main(args) == 1


def test_header_only_input_is_data_error(tmp_path, survey):
    path = write_responses(tmp_path / "empty.csv", survey, [])
    assert main(["recode", "--in", str(path)]) == 2


def test_input_empty_after_cleaning_is_data_error(tmp_path, survey):
    rows = [
        dict(valid_answers(survey), org_id="ORG-01", respondent_id=f"R{i}", ac_least_privilege="7")
        for i in range(3)
    ]
    path = write_responses(tmp_path / "invalid.csv", survey, rows)
    assert main(["assess", "--in", str(path), "--out", str(tmp_path / "out")]) == 2


def test_missing_input_is_data_error(tmp_path):
    assert main(["recode", "--in", str(tmp_path / "missing.csv")]) == 2


@pytest.mark.parametrize("argv", [
    [],
    ["assess"],
    ["bogus", "--in", "x.csv"],
    ["recode", "--in", "x.csv", "--format", "yaml"],
    ["recode", "--in", "x.csv", "--seed", "many"],
])
def test_bad_arguments_are_usage_errors(argv):
    assert main(argv) == 1


def test_top_below_one_is_usage_error(developing_csv):
    assert main(["recode", "--in", str(developing_csv), "--top", "0"]) == 1


@pytest.mark.parametrize("text", [
    "[forest]\nn_treez = 5\n",
    "[mystery]\nkey = 1\n",
    "[preprocess]\ntest_fraction = 2\n",
    "[pipeline]\nverbose = true\n",
    "not an ini file\n",
])
def test_config_errors_are_usage_errors(tmp_path, developing_csv, text):
    path = tmp_path / "bad.ini"
    path.write_text(text, encoding="utf-8")
    assert main(["recode", "--in", str(developing_csv), "--config", str(path)]) == 1


def test_missing_config_file_is_usage_error(tmp_path, developing_csv):
    assert main(["recode", "--in", str(developing_csv), "--config", str(tmp_path / "none.ini")]) == 1


def test_synth_is_deterministic(tmp_path, developing_csv):
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["synth", "--in", str(DEVELOPING_SCENARIO), "--out", str(first)]) == 0
    assert main(["synth", "--in", str(DEVELOPING_SCENARIO), "--out", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes() == developing_csv.read_bytes()
    assert (tmp_path / "a.truth.json").is_file()


def test_synth_seed_override_and_stdout(capsys, tmp_path):
    assert main(["synth", "--in", str(DEVELOPING_SCENARIO)]) == 0
    default = capsys.readouterr().out
    assert main(["synth", "--in", str(DEVELOPING_SCENARIO), "--seed", "7"]) == 0
    reseeded = capsys.readouterr().out
    assert default.startswith("org_id,respondent_id,")
    assert reseeded != default


def test_recode_writes_scored_dataset(tmp_path, developing_csv):
    assert main(["recode", "--in", str(developing_csv), "--out", str(tmp_path)]) == 0
    document = json.loads((tmp_path / DATASET_JSON).read_text(encoding="utf-8"))
    assert len(document["rows"]) == 60
    assert len(document["feature_names"]) == 63
    assert {row["label"] for row in document["rows"]} <= {"Basic", "Developing", "Advanced"}


def test_recode_text_format(capsys, developing_csv):
    assert main(["recode", "--in", str(developing_csv), "--format", "text"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].startswith("org_id")
    assert len(lines) == 61
