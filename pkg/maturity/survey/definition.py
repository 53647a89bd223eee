"""
Questionnaire schema: sections, response scales, recode maps and raw response records.

Survey definitions are loaded from a versioned YAML file so every recode map
stays auditable outside the code.
"""
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from typing import Annotated, Dict, List, Literal, Optional, Union
from enum import Enum
from pathlib import Path
import yaml

from maturity.errors import FileUnreadable, SurveyDefinitionInvalid, UnknownLabel


SUPPORTED_SCHEMA_VERSIONS = (1,)


class Section(str, Enum):
    THREAT_PATTERNS = "ThreatPatterns"
    ACCESS_CONTROL = "AccessControl"
    SECURITY_MEASURES = "SecurityMeasures"
    POLICY_GAPS = "PolicyGaps"
    PROACTIVE_MEASURES = "ProactiveMeasures"


# Composite dimensions in reporting order
DIMENSIONS = ("security_maturity", "threat_awareness", "access_control", "policy_framework")

DEFAULT_DIMENSION_SECTIONS: Dict[str, List[Section]] = {
    "security_maturity": [Section.SECURITY_MEASURES],
    "threat_awareness": [Section.THREAT_PATTERNS],
    "access_control": [Section.ACCESS_CONTROL],
    "policy_framework": [Section.POLICY_GAPS, Section.PROACTIVE_MEASURES],
}


class RecodeEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    label: str
    value: float = Field(ge=0.0)


class RecodeMap(BaseModel):
    """Ordered label -> value map; values strictly increase in label order"""
    model_config = ConfigDict(frozen=True)

    entries: List[RecodeEntry]

    @field_validator("entries")
    @classmethod
    def check_ordinal(cls, entries: List[RecodeEntry]) -> List[RecodeEntry]:
        if not entries:
            raise ValueError("recode map needs at least one entry")
        labels = [entry.label for entry in entries]
        if len(set(labels)) != len(labels):
            raise ValueError(f"recode labels must be distinct: {labels}")
        values = [entry.value for entry in entries]
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ValueError(f"recode values must be strictly increasing: {values}")
        return entries

    @property
    def labels(self) -> List[str]:
        return [entry.label for entry in self.entries]

    def value_for(self, label: str) -> float:
        for entry in self.entries:
            if entry.label == label:
                return entry.value
        raise UnknownLabel(f"'{label}' is not one of {self.labels}")

    def label_for(self, value: float) -> str:
        for entry in self.entries:
            if entry.value == value:
                return entry.label
        raise UnknownLabel(f"{value!r} is not a recoded value of {self.labels}")


class Likert5Scale(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["likert5"] = "likert5"


class OrdinalRangeScale(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["ordinal_range"] = "ordinal_range"
    recode: RecodeMap


class MultiSelectScale(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["multi_select"] = "multi_select"
    options: List[str]

    @field_validator("options")
    @classmethod
    def check_options(cls, options: List[str]) -> List[str]:
        if not options:
            raise ValueError("multi-select question needs options")
        if len(set(options)) != len(options):
            raise ValueError(f"multi-select options must be distinct: {options}")
        if any(";" in option for option in options):
            raise ValueError("multi-select options cannot contain ';'")
        return options


class CountScale(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["count"] = "count"


ResponseScale = Annotated[
    Union[Likert5Scale, OrdinalRangeScale, MultiSelectScale, CountScale],
    Field(discriminator="kind"),
]


class QuestionSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str
    section: Section
    prompt: str
    scale: ResponseScale
    required: bool = True

    @property
    def feature_names(self) -> List[str]:
        """Numeric feature columns this question encodes to"""
        if isinstance(self.scale, MultiSelectScale):
            return [f"{self.id}::{option}" for option in self.scale.options]
        return [self.id]

    @property
    def is_likert(self) -> bool:
        return isinstance(self.scale, Likert5Scale)


class SurveyDefinition(BaseModel):
    model_config = ConfigDict(frozen=True)

    schema_version: int = 1
    title: str = ""
    feature_count: int
    dimensions: Dict[str, List[Section]] = Field(default_factory=lambda: dict(DEFAULT_DIMENSION_SECTIONS))
    questions: List[QuestionSpec]

    @field_validator("schema_version")
    @classmethod
    def check_schema_version(cls, version: int) -> int:
        if version not in SUPPORTED_SCHEMA_VERSIONS:
            raise ValueError(f"unsupported schema_version {version}")
        return version

    @model_validator(mode="after")
    def check_consistency(self):
        ids = [question.id for question in self.questions]
        duplicates = sorted({qid for qid in ids if ids.count(qid) > 1})
        if duplicates:
            raise ValueError(f"duplicate question ids: {duplicates}")

        reserved = {"org_id", "respondent_id"} & set(ids)
        if reserved:
            raise ValueError(f"question ids clash with key columns: {sorted(reserved)}")

        encoded = sum(len(question.feature_names) for question in self.questions)
        if encoded != self.feature_count:
            raise ValueError(f"feature_count is {self.feature_count} but questions encode to {encoded} features")

        if set(self.dimensions) != set(DIMENSIONS):
            raise ValueError(f"dimensions must be exactly {list(DIMENSIONS)}")
        seen: List[Section] = []
        for sections in self.dimensions.values():
            for section in sections:
                if section in seen:
                    raise ValueError(f"section {section.value} feeds more than one dimension")
                seen.append(section)
        return self

    @property
    def question_ids(self) -> List[str]:
        return [question.id for question in self.questions]

    @property
    def feature_names(self) -> List[str]:
        names: List[str] = []
        for question in self.questions:
            names.extend(question.feature_names)
        return names

    def question(self, question_id: str) -> QuestionSpec:
        for question in self.questions:
            if question.id == question_id:
                return question
        raise KeyError(question_id)

    def has_question(self, question_id: str) -> bool:
        return any(question.id == question_id for question in self.questions)

    def dimension_items(self, dimension: str) -> List[str]:
        """Likert question ids contributing to a composite dimension"""
        sections = self.dimensions[dimension]
        return [q.id for q in self.questions if q.is_likert and q.section in sections]

    def dimension_item_counts(self) -> List[int]:
        return [len(self.dimension_items(dimension)) for dimension in DIMENSIONS]

    def feature_sections(self) -> Dict[str, str]:
        """Feature name -> section name, used for ranked importance tables"""
        return {name: q.section.value for q in self.questions for name in q.feature_names}

    def feature_prompts(self) -> Dict[str, str]:
        prompts = {}
        for question in self.questions:
            if isinstance(question.scale, MultiSelectScale):
                for option, name in zip(question.scale.options, question.feature_names):
                    prompts[name] = f"{question.prompt}: {option}"
            else:
                prompts[question.id] = question.prompt
        return prompts


class ResponseRecord(BaseModel):
    """Raw answers of one respondent; None marks an absent answer"""
    model_config = ConfigDict(frozen=True)

    org_id: str
    respondent_id: str
    row_index: int
    answers: Dict[str, Optional[str]]


def load_survey_definition(path: Union[str, Path]) -> SurveyDefinition:
    """Load and validate a survey definition YAML file"""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            document = yaml.safe_load(handle)
    except OSError as e:
        raise FileUnreadable(f"Cannot read survey definition {path}: {e}", stage="survey")
    except yaml.YAMLError as e:
        raise SurveyDefinitionInvalid(f"Survey definition {path} is not valid YAML: {e}")

    if not isinstance(document, dict):
        raise SurveyDefinitionInvalid(f"Survey definition {path} must be a mapping")

    try:
        return SurveyDefinition.model_validate(document)
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first["loc"])
        raise SurveyDefinitionInvalid(f"{path}: {location}: {first['msg']}")
