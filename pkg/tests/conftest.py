from pathlib import Path
import logging

import numpy as np
import pytest

from maturity.config import DEFAULT_SURVEY_PATH
from maturity.survey.definition import SurveyDefinition, load_survey_definition
from maturity.synth.generator import load_scenario, sample_dataset, write_dataset
from tests.helpers import DEVELOPING_SCENARIO


@pytest.fixture(autouse=True)
def reset_package_logger():
    """Undo configure_logging so caplog keeps seeing records after a CLI run"""
    yield
    logger = logging.getLogger("maturity")
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    logger.setLevel(logging.NOTSET)
    logger.propagate = True


@pytest.fixture(scope="session")
def survey() -> SurveyDefinition:
    return load_survey_definition(DEFAULT_SURVEY_PATH)


@pytest.fixture(scope="session")
def developing_spec():
    return load_scenario(DEVELOPING_SCENARIO)


@pytest.fixture(scope="session")
def developing_dataset(survey, developing_spec):
    return sample_dataset(developing_spec, survey)


@pytest.fixture(scope="session")
def developing_csv(tmp_path_factory, developing_spec, developing_dataset) -> Path:
    target = tmp_path_factory.mktemp("fixtures") / "developing_dominant.csv"
    write_dataset(developing_dataset, developing_spec.true_params, target)
    return target


@pytest.fixture(scope="session")
def xor_data():
    """400 rows: label is XOR of features 0 and 1 thresholded at 0.3; 8 pure-noise features"""
    rng = np.random.default_rng(2024)
    X = rng.uniform(0.0, 1.0, size=(400, 10))
    y = ((X[:, 0] > 0.3) ^ (X[:, 1] > 0.3)).astype(int)
    return X, y
