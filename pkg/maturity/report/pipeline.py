"""
Stage orchestration behind every CLI command.

assess runs the five stages in order: load and clean, score, fit the HMM and classify
organizations, train and validate the forest, explain it. validate and explain reuse
the same stage methods on a raw CSV or a scored dataset document.
"""
from pydantic import BaseModel, ConfigDict
from typing import Callable, Dict, List, Optional, Tuple, Union
from pathlib import Path
from importlib import metadata as importlib_metadata
import logging

import numpy as np

from maturity import __version__
from maturity.config import Settings
from maturity.errors import (
    DataError,
    DimensionMismatch,
    TooFewRows,
    UnknownSelector,
    ZeroVariance,
)
from maturity.explain.correlation import importance_correlation, shap_correlation_matrix
from maturity.explain.shapley import forest_shap_importance, global_shap_importance, sample_background, shap_matrix, shap_values
from maturity.explain.surrogate import LimeExplanation, TrainingStats, lime_contributions, lime_explain
from maturity.forest.ensemble import Forest, ForestConfig, feature_importance, fit_forest, oob_score, predict, predict_proba
from maturity.forest.metrics import evaluate
from maturity.forest.validation import cross_validate
from maturity.hmm.classification import (
    MaturityClassification,
    StateLabelMap,
    classify_organizations,
    map_states,
    transition_report,
)
from maturity.hmm.params import HmmParams, observation_sequences
from maturity.hmm.training import HmmFit, fit_hmm
from maturity.preprocess.loader import CleaningReport, load_clean_dataset
from maturity.preprocess.scoring import HMM_STATE_FEATURE, MaturityLabel, ScoredDataset, compute_composites
from maturity.preprocess.splitting import DatasetSplit, stratified_split
from maturity.preprocess.statistics import binarized_prevalence, category_distribution, describe, prevalence
from maturity.report.models import (
    AssessmentReport,
    BinarizedShare,
    CleaningSummary,
    DescriptiveSection,
    ExplainReport,
    ExplanationSection,
    FeatureAttribution,
    HmmSection,
    InstanceExplanation,
    LimeSummary,
    OrganizationResult,
    PrevalenceEntry,
    PrevalenceTable,
    RankedFeature,
    RunMetadata,
    SplitSummary,
    ValidationReport,
    ValidationSection,
)
from maturity.report.schema import check_report
from maturity.store.artifacts import (
    REPORT_JSON,
    REPORT_TEXT,
    ArtifactStore,
    dumps,
    is_scored_dataset,
    load_scored_dataset,
    sha256_bytes,
    sha256_file,
)
from maturity.survey.definition import CountScale, MultiSelectScale, OrdinalRangeScale, SurveyDefinition, load_survey_definition
from maturity.utils.seeding import derive_seed


logger = logging.getLogger(__name__)

HMM_STATE_SECTION = "HiddenState"
HMM_STATE_PROMPT = "Maturity label of the respondent's decoded HMM state"
LIME_ORG_STREAM = 0x11E0
LIME_ROW_STREAM = 0x11E1


class HmmStage(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    fit: HmmFit
    label_map: StateLabelMap
    classifications: List[MaturityClassification]
    dataset: ScoredDataset


class ForestStage(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    forest: Forest
    split: DatasetSplit
    section: ValidationSection
    X: np.ndarray
    feature_names: List[str]


class AssessmentResult(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    report: AssessmentReport
    dataset: ScoredDataset
    hmm: HmmStage
    forest: Forest


REPORTED_DISTRIBUTIONS = ("jsonschema", "numpy", "pandas", "pydantic", "scikit-learn", "scipy")


def library_versions() -> Dict[str, str]:
    versions = {"maturity": __version__}
    for name in REPORTED_DISTRIBUTIONS:
        try:
            versions[name] = importlib_metadata.version(name)
        except importlib_metadata.PackageNotFoundError:
            versions[name] = "unknown"
    return versions


def config_digest(settings: Settings) -> str:
    """SHA-256 of every setting that can change an emitted number"""
    document = settings.model_dump(mode="json", exclude={"survey_path", "log_level"})
    return sha256_bytes(dumps(document).encode("utf-8"))


def parse_selector(selector: str, dataset: ScoredDataset) -> List[int]:
    """Resolve `org:<id>` or `row:<row_index>` to dataset positions"""
    kind, _, value = selector.partition(":")
    if kind == "org" and value:
        positions = [i for i, org in enumerate(dataset.org_index) if org == value]
        if not positions:
            raise UnknownSelector(f"no organization {value!r} in the dataset")
        return positions
    if kind == "row" and value:
        try:
            row = int(value)
        except ValueError:
            raise UnknownSelector(f"row selector needs an integer, got {value!r}")
        if row not in dataset.row_index:
            raise UnknownSelector(f"no row {row} in the dataset (dropped or out of range)")
        return [dataset.row_index.index(row)]
    raise UnknownSelector(f"selector must look like org:<id> or row:<index>, got {selector!r}")


def _column_means(X: np.ndarray, fallback: np.ndarray) -> np.ndarray:
    """Per-column mean of present values; columns with none take the fallback"""
    present = ~np.isnan(X)
    counts = present.sum(axis=0)
    totals = np.where(present, X, 0.0).sum(axis=0)
    return np.where(counts > 0, totals / np.maximum(counts, 1), fallback)


class AssessmentPipeline:
    """Runs pipeline stages with one resolved configuration"""

    def __init__(self, settings: Settings):
        self.settings = settings
        self.survey: SurveyDefinition = load_survey_definition(settings.survey_path)
        self.survey_sha256 = sha256_file(settings.survey_path)

    # Stage 1-2
    def load_scored(self, path: Union[str, Path]) -> Tuple[ScoredDataset, Optional[CleaningReport]]:
        """Scored dataset from a raw CSV (cleaned and scored) or from a scored dataset document"""
        if is_scored_dataset(path):
            dataset = load_scored_dataset(path)
            if dataset.feature_names != self.survey.feature_names:
                raise DimensionMismatch(
                    f"{path} was scored against a different survey definition", stage="load"
                )
            logger.info(f"Loaded scored dataset with {len(dataset)} respondents from {path}")
            return dataset, None

        prep = self.settings.preprocess
        records, cleaning = load_clean_dataset(self.survey, path, prep.max_missing_fraction)
        dataset = compute_composites(self.survey, records, prep.basic_upper, prep.advanced_lower)
        return dataset, cleaning

    def metadata(self, command: str, input_path: Union[str, Path]) -> RunMetadata:
        return RunMetadata(
            command=command,
            seed=self.settings.seed,
            versions=library_versions(),
            input_sha256=sha256_file(input_path),
            survey_sha256=self.survey_sha256,
            config_sha256=config_digest(self.settings),
        )

    def descriptive(self, dataset: ScoredDataset, cleaning: CleaningReport) -> DescriptiveSection:
        records = cleaning.kept
        prevalence_tables: List[PrevalenceTable] = []
        category_tables: List[PrevalenceTable] = []
        binarized: List[BinarizedShare] = []

        for question in self.survey.questions:
            if isinstance(question.scale, MultiSelectScale):
                shares = prevalence(self.survey, records, question.id)
                prevalence_tables.append(self._table(question.id, question.prompt, shares))
                continue
            if not isinstance(question.scale, (OrdinalRangeScale, CountScale)):
                continue
            try:
                if isinstance(question.scale, OrdinalRangeScale):
                    shares = category_distribution(self.survey, records, question.id)
                    category_tables.append(self._table(question.id, question.prompt, shares))
                at_least_one, none = binarized_prevalence(self.survey, records, question.id)
            except DataError as e:
                logger.warning(f"{question.id}: {e}")
                continue
            binarized.append(BinarizedShare(question_id=question.id, at_least_one=at_least_one, none=none))

        counts = np.bincount(dataset.labels, minlength=len(MaturityLabel))
        return DescriptiveSection(
            dimensions=describe(dataset),
            prevalence=prevalence_tables,
            categories=category_tables,
            binarized=binarized,
            threshold_labels={label.display: int(counts[label]) for label in MaturityLabel},
        )

    @staticmethod
    def _table(question_id: str, prompt: str, shares: List[Tuple[str, float]]) -> PrevalenceTable:
        return PrevalenceTable(
            question_id=question_id,
            prompt=prompt,
            entries=[PrevalenceEntry(label=label, percent=percent) for label, percent in shares],
        )

    # Stage 3-4
    def run_hmm(self, dataset: ScoredDataset) -> HmmStage:
        hmm = self.settings.hmm
        prep = self.settings.preprocess
        fit = fit_hmm(
            observation_sequences(dataset),
            n_states=hmm.n_states,
            seed=self.settings.seed,
            tol=hmm.tol,
            max_iter=hmm.max_iter,
            variance_floor=hmm.variance_floor,
            n_restarts=hmm.n_restarts,
            stacked=hmm.stacked,
        )
        label_map = map_states(fit.params, prep.basic_upper, prep.advanced_lower, self.survey.dimension_item_counts())
        logger.info(f"State labels: {label_map.to_document()}")
        classifications, row_labels = classify_organizations(fit.params, dataset, label_map, hmm.decoder)
        return HmmStage(
            fit=fit,
            label_map=label_map,
            classifications=classifications,
            dataset=dataset.with_hmm_states(row_labels),
        )

    def hmm_section(self, stage: HmmStage) -> HmmSection:
        params = stage.fit.params
        return HmmSection(
            n_states=params.n_states,
            decoder=self.settings.hmm.decoder,
            stacked=stage.fit.stacked,
            log_likelihood=stage.fit.log_likelihood,
            n_iter=stage.fit.n_iter,
            converged=stage.fit.converged,
            restart=stage.fit.restart,
            label_map=stage.label_map.to_document(),
            state_means=params.means.tolist(),
            transitions=transition_report(params, stage.label_map),
            organizations=[
                OrganizationResult(
                    org_id=c.org_id,
                    dominant=c.dominant.display,
                    confidence=c.confidence,
                    state_counts=c.state_counts,
                    label_counts=c.label_counts,
                    n_observations=c.n_observations,
                )
                for c in stage.classifications
            ],
        )

    def with_states(self, dataset: ScoredDataset, params: HmmParams, label_map: StateLabelMap) -> ScoredDataset:
        """Attach decoded maturity labels from an already fitted HMM"""
        _, row_labels = classify_organizations(params, dataset, label_map, self.settings.hmm.decoder)
        return dataset.with_hmm_states(row_labels)

    # Stage 5
    def forest_config(self) -> ForestConfig:
        forest = self.settings.forest
        return ForestConfig(
            n_trees=forest.n_trees,
            max_depth=forest.max_depth,
            min_samples_leaf=forest.min_samples_leaf,
        )

    def rank_features(self, names: List[str], importance: np.ndarray, top_n: int) -> List[RankedFeature]:
        sections = self.survey.feature_sections()
        prompts = self.survey.feature_prompts()
        sections[HMM_STATE_FEATURE] = HMM_STATE_SECTION
        prompts[HMM_STATE_FEATURE] = HMM_STATE_PROMPT

        order = np.argsort(-np.asarray(importance, dtype=float), kind="stable")[:top_n]
        return [
            RankedFeature(
                rank=rank + 1,
                feature=names[j],
                importance=float(importance[j]),
                section=sections.get(names[j], ""),
                prompt=prompts.get(names[j], ""),
            )
            for rank, j in enumerate(order)
        ]

    def run_forest(self, dataset: ScoredDataset, top_n: int) -> ForestStage:
        include_state = self.settings.forest.include_hmm_state
        X, names = dataset.model_matrix(include_state)
        y = np.asarray(dataset.labels, dtype=int)
        seed = self.settings.seed
        config = self.forest_config()

        split = stratified_split(y, self.settings.preprocess.test_fraction, seed)
        train, test = np.asarray(split.train_rows), np.asarray(split.test_rows)
        forest = fit_forest(X[train], y[train], config, seed, names)
        metrics = evaluate(y[test], predict(forest, X[test]))

        update = {"oob_accuracy": oob_score(forest, X[train], y[train])}
        try:
            cv = cross_validate(X, y, self.settings.forest.cv_folds, config, seed)
            update.update(cv_mean=cv.mean, cv_std=cv.std, cv_scores=cv.scores, cv_degraded=cv.degraded)
        except TooFewRows as e:
            logger.warning(f"Cross-validation skipped: {e.message}")
        metrics = metrics.model_copy(update=update)
        logger.info(f"Held-out accuracy {metrics.accuracy:.3f} on {len(test)} rows")

        section = ValidationSection(
            split=SplitSummary(
                n_train=len(train),
                n_test=len(test),
                test_fraction=self.settings.preprocess.test_fraction,
            ),
            n_features=len(names),
            include_hmm_state=include_state,
            metrics=metrics,
            feature_ranking=self.rank_features(names, feature_importance(forest), top_n),
        )
        return ForestStage(forest=forest, split=split, section=section, X=X, feature_names=names)

    def target_label(self, forest: Forest) -> MaturityLabel:
        """Configured explanation target, or the most mature class the forest knows"""
        wanted = MaturityLabel.from_display(self.settings.explain.target_class)
        if int(wanted) in forest.classes:
            return wanted
        fallback = MaturityLabel(max(forest.classes))
        logger.warning(f"Forest has no {wanted.display} class; explaining {fallback.display} instead")
        return fallback

    def class_output(self, forest: Forest, label: MaturityLabel) -> Callable[[np.ndarray], np.ndarray]:
        column = forest.class_index(int(label))
        return lambda rows: predict_proba(forest, rows)[:, column]

    def lime(self, forest: Forest, x: np.ndarray, stats: TrainingStats, label: MaturityLabel,
             seed: int, instance: str) -> LimeExplanation:
        explain = self.settings.explain
        return lime_explain(
            self.class_output(forest, label),
            x,
            stats,
            n_samples=explain.lime_samples,
            kernel_width=explain.lime_kernel_width,
            k=explain.top_k,
            seed=seed,
            ridge_alpha=explain.ridge_alpha,
            instance=instance,
        )

    def explanation_section(self, dataset: ScoredDataset, stage: ForestStage, top_n: int) -> ExplanationSection:
        forest, X, names = stage.forest, stage.X, stage.feature_names
        explain = self.settings.explain
        seed = self.settings.seed
        label = self.target_label(forest)

        background = sample_background(X[np.asarray(stage.split.train_rows)], explain.background_size, seed)
        values = shap_matrix(forest, X, background, int(label))
        shap_global = global_shap_importance(values, names)

        correlation = None
        try:
            correlation = importance_correlation(shap_global.importance, feature_importance(forest))
            logger.info(f"SHAP vs forest importance: r={correlation.r:.3f}")
        except (TooFewRows, ZeroVariance) as e:
            logger.warning(f"Importance correlation unavailable: {e.message}")

        matrix = None
        try:
            matrix = shap_correlation_matrix(values, names, explain.correlation_top_n)
        except TooFewRows as e:
            logger.warning(f"SHAP correlation matrix unavailable: {e.message}")

        stats = TrainingStats.from_matrix(X[np.asarray(stage.split.train_rows)], names)
        lime_summaries = []
        for i, org_id in enumerate(dataset.organizations):
            rows = [r for r, org in enumerate(dataset.org_index) if org == org_id]
            profile = _column_means(X[rows], np.asarray(stats.mean))
            explanation = self.lime(forest, profile, stats, label, derive_seed(seed, LIME_ORG_STREAM + i), org_id)
            lime_summaries.append(LimeSummary(org_id=org_id, n_rows=len(rows), explanation=explanation))

        return ExplanationSection(
            target_class=label.display,
            background_size=int(background.shape[0]),
            shap_ranking=self.rank_features(names, np.asarray(shap_global.importance), top_n),
            importance_correlation=correlation,
            shap_correlation=matrix,
            lime=lime_summaries,
        )

    # Commands
    def assess(self, input_path: Union[str, Path], top_n: Optional[int] = None) -> AssessmentResult:
        top_n = top_n or self.settings.report.top_n
        metadata = self.metadata("assess", input_path)
        dataset, cleaning = self.load_scored(input_path)
        if cleaning is None:
            raise DataError("assess needs a raw response CSV, not a scored dataset", stage="load")

        descriptive = self.descriptive(dataset, cleaning)
        hmm_stage = self.run_hmm(dataset)
        dataset = hmm_stage.dataset
        forest_stage = self.run_forest(dataset, top_n)
        explanation = self.explanation_section(dataset, forest_stage, top_n)

        report = AssessmentReport(
            metadata=metadata,
            cleaning=CleaningSummary(
                n_loaded=len(cleaning.kept) + len(cleaning.dropped),
                n_kept=len(cleaning.kept),
                dropped=cleaning.dropped,
            ),
            descriptive=descriptive,
            hmm=self.hmm_section(hmm_stage),
            validation=forest_stage.section,
            explanation=explanation,
        )
        document = report.model_dump(mode="json")
        check_report(document)
        report = AssessmentReport.model_validate(document)
        return AssessmentResult(report=report, dataset=dataset, hmm=hmm_stage, forest=forest_stage.forest)

    def validate(self, input_path: Union[str, Path], top_n: Optional[int] = None) -> ValidationReport:
        top_n = top_n or self.settings.report.top_n
        metadata = self.metadata("validate", input_path)
        dataset, _ = self.load_scored(input_path)
        if self.settings.forest.include_hmm_state and dataset.hmm_states is None:
            dataset = self.run_hmm(dataset).dataset
        stage = self.run_forest(dataset, top_n)
        return ValidationReport(metadata=metadata, validation=stage.section)

    def explain(
        self,
        input_path: Union[str, Path],
        model_dir: Union[str, Path],
        selector: Optional[str] = None,
        top_n: Optional[int] = None,
    ) -> ExplainReport:
        top_n = top_n or self.settings.report.top_n
        explain = self.settings.explain
        seed = self.settings.seed
        metadata = self.metadata("explain", input_path)
        store = ArtifactStore(model_dir)
        forest = store.load_forest()
        dataset, _ = self.load_scored(input_path)
        positions = parse_selector(selector, dataset) if selector else []

        include_state = bool(forest.feature_names) and HMM_STATE_FEATURE in forest.feature_names
        if include_state and dataset.hmm_states is None:
            params, label_map, _ = store.load_hmm()
            dataset = self.with_states(dataset, params, label_map)
        X, names = dataset.model_matrix(include_state)
        if forest.feature_names is not None and names != forest.feature_names:
            raise DimensionMismatch("dataset features do not match the serialized forest", stage="explain")

        label = self.target_label(forest)
        background = sample_background(X, explain.background_size, seed)
        shap_global = forest_shap_importance(forest, X, background, int(label), names)
        stats = TrainingStats.from_matrix(X, names)

        instances: List[InstanceExplanation] = []
        for position in positions:
            row = dataset.row_index[position]
            name = f"{dataset.org_index[position]}/{dataset.respondent_ids[position]}"
            shap = shap_values(forest, X[position], background, instance=name)
            attributions = shap.for_class(int(label))
            order = np.argsort(-np.abs(attributions), kind="stable")[: explain.top_k]
            instances.append(InstanceExplanation(
                org_id=dataset.org_index[position],
                respondent_id=dataset.respondent_ids[position],
                row_index=row,
                target_class=label.display,
                base_value=shap.base_for_class(int(label)),
                output=shap.output(int(label)),
                feature_names=names,
                values=attributions.tolist(),
                top=[FeatureAttribution(feature=names[j], value=float(attributions[j])) for j in order],
                lime=self.lime(forest, X[position], stats, label, derive_seed(seed, LIME_ROW_STREAM + row), name),
            ))

        return ExplainReport(
            metadata=metadata,
            target_class=label.display,
            selector=selector,
            shap_ranking=self.rank_features(names, np.asarray(shap_global.importance), top_n),
            instances=instances,
            mean_lime_contributions=self._mean_lime(instances, X[positions], stats, names, explain.top_k),
        )

    @staticmethod
    def _mean_lime(
        instances: List[InstanceExplanation],
        rows: np.ndarray,
        stats: TrainingStats,
        names: List[str],
        k: int,
    ) -> List[FeatureAttribution]:
        """Average LIME contribution (coefficient times standardized value) per feature over the selected rows"""
        if not instances:
            return []
        totals = np.zeros(len(names))
        for instance, x in zip(instances, rows):
            totals += lime_contributions(instance.lime, x, stats)
        means = totals / len(instances)
        order = [j for j in np.argsort(-np.abs(means), kind="stable")[:k] if means[j] != 0.0]
        return [FeatureAttribution(feature=names[j], value=float(means[j])) for j in order]

    def recode(self, input_path: Union[str, Path]) -> ScoredDataset:
        dataset, _ = self.load_scored(input_path)
        return dataset

    # Artifacts
    def save_assessment(self, result: AssessmentResult, out_dir: Union[str, Path], text: str) -> ArtifactStore:
        store = ArtifactStore(out_dir)
        store.write_json(REPORT_JSON, result.report.model_dump(mode="json"))
        store.write_text(REPORT_TEXT, text)
        store.save_dataset(result.dataset)
        store.save_hmm(result.hmm.fit.params, result.hmm.label_map, self.settings.seed)
        store.save_forest(result.forest)
        logger.info(f"Artifacts written to {store.root}")
        return store

