"""
Plain-text summaries of the report models.
"""
from typing import List, Optional

from maturity.forest.metrics import MetricsReport
from maturity.preprocess.scoring import COMPOSITE_COLUMNS, MaturityLabel, ScoredDataset
from maturity.preprocess.statistics import DimensionSummary
from maturity.report.models import (
    AssessmentReport,
    DescriptiveSection,
    ExplainReport,
    ExplanationSection,
    HmmSection,
    RankedFeature,
    RunMetadata,
    ValidationReport,
    ValidationSection,
)


RULE = "=" * 72


def _number(value: Optional[float], digits: int = 3) -> str:
    return "n/a" if value is None else f"{value:.{digits}f}"


def _heading(title: str) -> List[str]:
    return ["", title, "-" * len(title)]


def _metadata(meta: RunMetadata) -> List[str]:
    return [
        RULE,
        f"Insider threat maturity {meta.command}",
        RULE,
        f"seed            {meta.seed}",
        f"input sha256    {meta.input_sha256}",
        f"survey sha256   {meta.survey_sha256}",
        f"config sha256   {meta.config_sha256}",
        "versions        " + ", ".join(f"{name} {version}" for name, version in sorted(meta.versions.items())),
    ]


def _dimensions(rows: List[DimensionSummary]) -> List[str]:
    lines = [f"{'dimension':<20}{'n':>5}{'mean':>8}{'std':>8}{'min':>7}{'q25':>7}{'median':>8}{'q75':>7}{'max':>7}"]
    for row in rows:
        lines.append(
            f"{row.dimension:<20}{row.count:>5}{_number(row.mean, 2):>8}{_number(row.std, 2):>8}"
            f"{_number(row.min, 2):>7}{_number(row.q25, 2):>7}{_number(row.median, 2):>8}"
            f"{_number(row.q75, 2):>7}{_number(row.max, 2):>7}"
        )
    return lines


def _descriptive(section: DescriptiveSection) -> List[str]:
    lines = _heading("Composite dimensions") + _dimensions(section.dimensions)
    lines.append("threshold labels: " + ", ".join(f"{k} {v}" for k, v in section.threshold_labels.items()))
    for table in section.prevalence + section.categories:
        lines += _heading(f"{table.question_id}: {table.prompt}")
        lines += [f"  {entry.percent:6.1f}%  {entry.label}" for entry in table.entries]
    for share in section.binarized:
        lines.append(f"{share.question_id}: at least one {share.at_least_one:.1f}%, none {share.none:.1f}%")
    return lines


def _hmm(section: HmmSection) -> List[str]:
    lines = _heading("Hidden Markov model")
    lines.append(
        f"{section.n_states} states, {section.decoder} decoding, log-likelihood {section.log_likelihood:.4f} "
        f"({section.n_iter} iterations, restart {section.restart}, "
        f"{'converged' if section.converged else 'not converged'})"
    )
    lines.append("state labels: " + ", ".join(section.label_map))

    report = section.transitions
    lines += _heading("Transition matrix")
    lines.append(" " * 12 + "".join(f"{name:>12}" for name in report.labels))
    for name, row in zip(report.labels, report.matrix):
        lines.append(f"{name:<12}" + "".join(f"{p:>12.3f}" for p in row))
    lines.append("persistence: " + ", ".join(f"{k} {v:.3f}" for k, v in report.persistence.items()))
    lines.append("stationary:  " + ", ".join(f"{k} {v:.3f}" for k, v in report.stationary.items()))

    lines += _heading("Organizations")
    for org in section.organizations:
        counts = ", ".join(f"{k} {v}" for k, v in org.label_counts.items())
        lines.append(f"{org.org_id:<16}{org.dominant:<12}confidence {org.confidence:.3f}  ({counts})")
    return lines


def _ranking(title: str, ranking: List[RankedFeature]) -> List[str]:
    lines = _heading(title)
    for item in ranking:
        lines.append(f"{item.rank:>3}. {item.importance:.4f}  {item.feature:<40} [{item.section}]")
    return lines


def _metrics(metrics: MetricsReport) -> List[str]:
    lines = [f"accuracy {metrics.accuracy:.3f} on {metrics.n} rows, kappa {_number(metrics.kappa)}"]
    lines.append(
        f"macro precision {metrics.macro_precision:.3f}, recall {metrics.macro_recall:.3f}, f1 {metrics.macro_f1:.3f}"
    )
    for item in metrics.per_class:
        lines.append(
            f"  {item.label:<12}P {item.precision:.2f}  R {item.recall:.2f}  F1 {item.f1:.2f}  support {item.support}"
        )
    labels = metrics.confusion.labels
    lines.append("confusion (rows actual, columns predicted):")
    lines.append(" " * 14 + "".join(f"{name:>12}" for name in labels))
    for name, row in zip(labels, metrics.confusion.counts):
        lines.append(f"  {name:<12}" + "".join(f"{c:>12d}" for c in row))
    if metrics.cv_mean is not None:
        note = " (degraded stratification)" if metrics.cv_degraded else ""
        lines.append(f"cross-validation accuracy {metrics.cv_mean:.3f} +/- {_number(metrics.cv_std)}{note}")
    if metrics.oob_accuracy is not None:
        lines.append(f"out-of-bag accuracy {metrics.oob_accuracy:.3f}")
    return lines


def _validation(section: ValidationSection) -> List[str]:
    lines = _heading("Random forest")
    lines.append(
        f"{section.n_features} features, train {section.split.n_train} / test {section.split.n_test}"
        + (", with decoded HMM state" if section.include_hmm_state else "")
    )
    lines += _metrics(section.metrics)
    lines += _ranking("Forest feature importance", section.feature_ranking)
    return lines


def _explanation(section: ExplanationSection) -> List[str]:
    lines = _ranking(f"Global SHAP importance ({section.target_class})", section.shap_ranking)
    if section.importance_correlation is not None:
        c = section.importance_correlation
        lines.append(f"SHAP vs forest importance: r = {c.r:.3f} (p = {c.p_value:.2e}, n = {c.n})")
    for summary in section.lime:
        explanation = summary.explanation
        lines += _heading(f"LIME {summary.org_id} ({summary.n_rows} respondents, fidelity {explanation.fidelity:.3f})")
        if explanation.degenerate:
            lines.append("  constant model output around this profile")
        for weight in explanation.weights:
            lines.append(f"  {weight.coefficient:+.4f}  {weight.feature}")
    return lines


def render_assessment(report: AssessmentReport) -> str:
    lines = _metadata(report.metadata)
    lines.append(
        f"responses loaded {report.cleaning.n_loaded}, kept {report.cleaning.n_kept}, "
        f"dropped {len(report.cleaning.dropped)}"
    )
    for row in report.cleaning.dropped:
        lines.append(f"  row {row.row_index} ({row.org_id}/{row.respondent_id}): {row.reason}")
    lines += _descriptive(report.descriptive)
    lines += _hmm(report.hmm)
    lines += _validation(report.validation)
    lines += _explanation(report.explanation)
    return "\n".join(lines) + "\n"


def render_validation(report: ValidationReport) -> str:
    return "\n".join(_metadata(report.metadata) + _validation(report.validation)) + "\n"


def render_explain(report: ExplainReport) -> str:
    lines = _metadata(report.metadata)
    lines += _ranking(f"Global SHAP importance ({report.target_class})", report.shap_ranking)
    for instance in report.instances:
        lines += _heading(f"{instance.org_id}/{instance.respondent_id} (row {instance.row_index})")
        lines.append(f"base {instance.base_value:.4f} -> output {instance.output:.4f}")
        lines += [f"  SHAP {item.value:+.4f}  {item.feature}" for item in instance.top]
        lines += [f"  LIME {w.coefficient:+.4f}  {w.feature}" for w in instance.lime.weights]
    if report.mean_lime_contributions:
        lines += _heading(f"Mean LIME contribution ({report.selector})")
        lines += [f"  {item.value:+.4f}  {item.feature}" for item in report.mean_lime_contributions]
    return "\n".join(lines) + "\n"


def render_scored(dataset: ScoredDataset) -> str:
    lines = [f"{'org_id':<16}{'respondent':<14}" + "".join(f"{name[:10]:>11}" for name in COMPOSITE_COLUMNS) + "  label"]
    for i in range(len(dataset)):
        scores = "".join(f"{_number(score, 2) if score == score else 'n/a':>11}" for score in dataset.composites[i])
        lines.append(
            f"{dataset.org_index[i]:<16}{dataset.respondent_ids[i]:<14}{scores}  "
            f"{MaturityLabel(int(dataset.labels[i])).display}"
        )
    return "\n".join(lines) + "\n"
