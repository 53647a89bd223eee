from pydantic import BaseModel, ConfigDict
from typing import Dict, List, Optional

from maturity.explain.correlation import ImportanceCorrelation, ShapCorrelationMatrix
from maturity.explain.surrogate import LimeExplanation
from maturity.forest.metrics import MetricsReport
from maturity.hmm.classification import TransitionReport
from maturity.preprocess.loader import DroppedRow
from maturity.preprocess.statistics import DimensionSummary


class RunMetadata(BaseModel):
    model_config = ConfigDict(frozen=True)

    command: str
    seed: int
    versions: Dict[str, str]
    input_sha256: str
    survey_sha256: str
    config_sha256: str


class CleaningSummary(BaseModel):
    n_loaded: int
    n_kept: int
    dropped: List[DroppedRow] = []


class PrevalenceEntry(BaseModel):
    label: str
    percent: float


class PrevalenceTable(BaseModel):
    question_id: str
    prompt: str
    entries: List[PrevalenceEntry]


class BinarizedShare(BaseModel):
    """Share of answering respondents whose recoded answer is at least one, versus zero"""
    question_id: str
    at_least_one: float
    none: float


class DescriptiveSection(BaseModel):
    dimensions: List[DimensionSummary]
    # Multi-select option prevalence, highest first
    prevalence: List[PrevalenceTable] = []
    # Ordinal answer shares in declared label order
    categories: List[PrevalenceTable] = []
    binarized: List[BinarizedShare] = []
    threshold_labels: Dict[str, int]


class OrganizationResult(BaseModel):
    org_id: str
    dominant: str  # Basic / Developing / Advanced
    confidence: float
    state_counts: List[int]
    label_counts: Dict[str, int]
    n_observations: int


class HmmSection(BaseModel):
    n_states: int
    decoder: str
    stacked: bool
    log_likelihood: float
    n_iter: int
    converged: bool
    restart: int
    label_map: List[str]
    # Per composite dimension, one row per state
    state_means: List[List[float]]
    transitions: TransitionReport
    organizations: List[OrganizationResult]


class RankedFeature(BaseModel):
    rank: int
    feature: str
    importance: float
    section: str
    prompt: str


class SplitSummary(BaseModel):
    n_train: int
    n_test: int
    test_fraction: float


class ValidationSection(BaseModel):
    split: SplitSummary
    n_features: int
    include_hmm_state: bool
    metrics: MetricsReport
    feature_ranking: List[RankedFeature]


class LimeSummary(BaseModel):
    """Local surrogate of one organization's mean response profile"""
    org_id: str
    n_rows: int
    explanation: LimeExplanation


class ExplanationSection(BaseModel):
    target_class: str
    background_size: int
    shap_ranking: List[RankedFeature]
    importance_correlation: Optional[ImportanceCorrelation] = None
    shap_correlation: Optional[ShapCorrelationMatrix] = None
    lime: List[LimeSummary] = []


class AssessmentReport(BaseModel):
    metadata: RunMetadata
    cleaning: CleaningSummary
    descriptive: DescriptiveSection
    hmm: HmmSection
    validation: ValidationSection
    explanation: ExplanationSection


class ValidationReport(BaseModel):
    metadata: RunMetadata
    validation: ValidationSection


class FeatureAttribution(BaseModel):
    feature: str
    value: float


class InstanceExplanation(BaseModel):
    org_id: str
    respondent_id: str
    row_index: int
    target_class: str
    base_value: float
    output: float
    # Every feature's SHAP value, in feature order
    feature_names: List[str]
    values: List[float]
    top: List[FeatureAttribution]
    lime: LimeExplanation


class ExplainReport(BaseModel):
    metadata: RunMetadata
    target_class: str
    selector: Optional[str] = None
    shap_ranking: List[RankedFeature]
    instances: List[InstanceExplanation] = []
    # Mean LIME contribution (coefficient times standardized value) per feature over the selected rows
    mean_lime_contributions: List[FeatureAttribution] = []
