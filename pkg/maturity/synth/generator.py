"""
Synthetic survey datasets drawn from a ground-truth maturity chain.

Each organization walks the chain once per respondent. A respondent's state fixes a
target score per composite dimension, and every Likert item is the target plus item
noise, rounded and clamped to the 1-5 grid. Multi-select, ordinal and count answers
are drawn across the whole dataset from scenario frequencies.
"""
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from typing import Any, Dict, List, Literal, Optional, Union
from pathlib import Path
import logging
import math

import numpy as np
import pandas as pd
import yaml

from maturity.errors import FileUnreadable, ScenarioInvalid
from maturity.hmm.params import HmmParams
from maturity.preprocess.loader import KEY_COLUMNS
from maturity.store.artifacts import write_document
from maturity.survey.definition import (
    DIMENSIONS,
    CountScale,
    MultiSelectScale,
    OrdinalRangeScale,
    SurveyDefinition,
)
from maturity.survey.recoding import LIKERT_MAX, LIKERT_MIN, MULTI_SELECT_SEPARATOR
from maturity.utils.seeding import make_rng


logger = logging.getLogger(__name__)

QUOTA_STREAM = 0
COUNT_STREAM = 0xC0
FREQUENCY_TOL = 1e-6


class ScenarioSpec(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: str
    target_regime: Literal["developing-dominant", "mixed", "advanced"]
    n_orgs: int = Field(ge=1)
    respondents_per_org: int = Field(ge=1)
    seed: int
    item_noise_std: float = Field(gt=0)
    # State k of the chain is maturity label k; means are per composite dimension
    true_params: HmmParams
    org_ids: Optional[List[str]] = None
    # Question id -> option -> share of respondents selecting it
    multi_select: Dict[str, Dict[str, float]] = {}
    # Question id -> label -> share of respondents; shares sum to 1
    ordinal: Dict[str, Dict[str, float]] = {}
    # Question id -> Poisson mean
    counts: Dict[str, float] = {}
    # Organization id -> question id -> shift added to that item's target
    org_profiles: Dict[str, Dict[str, float]] = {}

    @field_validator("true_params", mode="before")
    @classmethod
    def parse_params(cls, value: Any) -> Any:
        if isinstance(value, dict):
            return HmmParams.from_document(value)
        return value

    @model_validator(mode="after")
    def check_consistency(self):
        if self.true_params.dim != len(DIMENSIONS):
            raise ValueError(f"true_params means need {len(DIMENSIONS)} columns, one per composite dimension")
        if self.true_params.n_states > 3:
            raise ValueError("ground-truth chains have at most 3 states")
        if self.org_ids is not None and len(self.org_ids) != self.n_orgs:
            raise ValueError("org_ids must list exactly n_orgs ids")
        for qid, rates in self.multi_select.items():
            if any(not 0.0 <= rate <= 1.0 for rate in rates.values()):
                raise ValueError(f"multi_select rates of {qid} must lie in [0, 1]")
        for qid, shares in self.ordinal.items():
            if abs(sum(shares.values()) - 1.0) > FREQUENCY_TOL or any(s < 0 for s in shares.values()):
                raise ValueError(f"ordinal shares of {qid} must be non-negative and sum to 1")
        unknown_orgs = set(self.org_profiles) - set(self.organization_ids)
        if unknown_orgs:
            raise ValueError(f"org_profiles name unknown organizations {sorted(unknown_orgs)}")
        return self

    @property
    def organization_ids(self) -> List[str]:
        return self.org_ids or [f"ORG-{i + 1:02d}" for i in range(self.n_orgs)]

    @property
    def n_respondents(self) -> int:
        return self.n_orgs * self.respondents_per_org

    def with_seed(self, seed: int) -> "ScenarioSpec":
        return self.model_copy(update={"seed": seed})

    def check_survey(self, survey: SurveyDefinition) -> None:
        """Every question named by the scenario must exist with a matching scale"""
        def expect(qid: str, scale_type, what: str) -> None:
            if not survey.has_question(qid) or not isinstance(survey.question(qid).scale, scale_type):
                raise ScenarioInvalid(f"{self.name}: {qid} is not a {what} question of the survey")

        for qid, rates in self.multi_select.items():
            expect(qid, MultiSelectScale, "multi-select")
            unknown = set(rates) - set(survey.question(qid).scale.options)
            if unknown:
                raise ScenarioInvalid(f"{self.name}: {qid} has no options {sorted(unknown)}")
        for qid, shares in self.ordinal.items():
            expect(qid, OrdinalRangeScale, "ordinal range")
            unknown = set(shares) - set(survey.question(qid).scale.recode.labels)
            if unknown:
                raise ScenarioInvalid(f"{self.name}: {qid} has no labels {sorted(unknown)}")
        for qid in self.counts:
            expect(qid, CountScale, "count")
        for profile in self.org_profiles.values():
            for qid in profile:
                if not survey.has_question(qid) or not survey.question(qid).is_likert:
                    raise ScenarioInvalid(f"{self.name}: profile shift on non-Likert question {qid}")


class SyntheticDataset(BaseModel):
    model_config = ConfigDict(frozen=True)

    columns: List[str]
    rows: List[Dict[str, str]]
    # Organization id -> true state per respondent, in file order
    states: Dict[str, List[int]]
    scenario: str
    seed: int

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=self.columns)

    def to_csv(self) -> str:
        return self.to_frame().to_csv(index=False, lineterminator="\n")

    def ground_truth(self, params: HmmParams) -> Dict[str, Any]:
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "params": params.to_document(),
            "states": self.states,
        }


def load_scenario(path: Union[str, Path]) -> ScenarioSpec:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            document = yaml.safe_load(handle)
    except OSError as e:
        raise FileUnreadable(f"Cannot read scenario {path}: {e}", stage="synth")
    except yaml.YAMLError as e:
        raise ScenarioInvalid(f"Scenario {path} is not valid YAML: {e}")
    if not isinstance(document, dict):
        raise ScenarioInvalid(f"Scenario {path} must be a mapping")

    try:
        return ScenarioSpec.model_validate(document)
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first["loc"])
        raise ScenarioInvalid(f"{path}: {location}: {first['msg']}")


def sample_states(params: HmmParams, length: int, rng: np.random.Generator) -> np.ndarray:
    """One trajectory of the chain"""
    states = np.zeros(length, dtype=int)
    states[0] = rng.choice(params.n_states, p=params.pi)
    for t in range(1, length):
        states[t] = rng.choice(params.n_states, p=params.A[states[t - 1]])
    return states


def quota_counts(shares: List[float], total: int) -> List[int]:
    """Integer counts closest to shares * total that add up to total (largest remainder, first on ties)"""
    exact = [share * total for share in shares]
    counts = [int(math.floor(value + 1e-9)) for value in exact]
    remainders = [value - count for value, count in zip(exact, counts)]
    for index in sorted(range(len(shares)), key=lambda i: (-remainders[i], i))[: total - sum(counts)]:
        counts[index] += 1
    return counts


def _round_to_scale(value: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(value + 0.5), LIKERT_MIN, LIKERT_MAX).astype(int)


def sample_dataset(spec: ScenarioSpec, survey: SurveyDefinition) -> SyntheticDataset:
    """Deterministic synthetic responses plus the true state of every respondent"""
    spec.check_survey(survey)
    params = spec.true_params
    n_total = spec.n_respondents
    dimension_of = {qid: d for d, name in enumerate(DIMENSIONS) for qid in survey.dimension_items(name)}

    rows: List[Dict[str, str]] = []
    states: Dict[str, List[int]] = {}
    for i, org_id in enumerate(spec.organization_ids):
        rng = make_rng(spec.seed, i + 1)
        path = sample_states(params, spec.respondents_per_org, rng)
        states[org_id] = path.tolist()
        profile = spec.org_profiles.get(org_id, {})

        for j, state in enumerate(path):
            target = rng.normal(params.means[state], np.sqrt(params.variances[state]))
            row = {"org_id": org_id, "respondent_id": f"R{j + 1:03d}"}
            for question in survey.questions:
                if not question.is_likert:
                    row[question.id] = ""
                    continue
                score = target[dimension_of[question.id]] + profile.get(question.id, 0.0)
                score += rng.normal(0.0, spec.item_noise_std)
                row[question.id] = str(int(_round_to_scale(np.asarray(score))))
            rows.append(row)

    quota_rng = make_rng(spec.seed, QUOTA_STREAM)
    for qid, rates in spec.multi_select.items():
        options = survey.question(qid).scale.options
        selected: List[List[str]] = [[] for _ in range(n_total)]
        for option in options:
            count = int(math.floor(rates.get(option, 0.0) * n_total + 0.5))
            for r in quota_rng.permutation(n_total)[:count]:
                selected[int(r)].append(option)
        for r, row in enumerate(rows):
            row[qid] = MULTI_SELECT_SEPARATOR.join(selected[r])

    for qid, shares in spec.ordinal.items():
        labels = [label for label in survey.question(qid).scale.recode.labels if label in shares]
        counts = quota_counts([shares[label] for label in labels], n_total)
        assigned = [label for label, count in zip(labels, counts) for _ in range(count)]
        for r, position in enumerate(quota_rng.permutation(n_total)):
            rows[int(position)][qid] = assigned[r]

    count_rng = make_rng(spec.seed, COUNT_STREAM)
    for qid, mean in spec.counts.items():
        values = count_rng.poisson(mean, size=n_total)
        for row, value in zip(rows, values):
            row[qid] = str(int(value))

    logger.info(f"Sampled scenario '{spec.name}': {spec.n_orgs} organizations x {spec.respondents_per_org} respondents")
    return SyntheticDataset(
        columns=list(KEY_COLUMNS) + survey.question_ids,
        rows=rows,
        states=states,
        scenario=spec.name,
        seed=spec.seed,
    )


def write_dataset(dataset: SyntheticDataset, params: HmmParams, csv_path: Union[str, Path]) -> Path:
    """Write the CSV and its ground-truth sidecar (<name>.truth.json); returns the sidecar path"""
    csv_path = Path(csv_path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    csv_path.write_text(dataset.to_csv(), encoding="utf-8")
    return write_document(csv_path.with_suffix(".truth.json"), dataset.ground_truth(params))
