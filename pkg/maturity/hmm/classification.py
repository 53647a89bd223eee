"""
Maps fitted HMM states to maturity labels and turns decoded sequences into
per-organization classifications and a labelled transition report.
"""
from pydantic import BaseModel, ConfigDict
from typing import Dict, List, Optional, Sequence, Tuple
import logging

import numpy as np

from maturity.hmm.inference import decode
from maturity.hmm.params import DecodedStates, HmmParams, observation_sequences
from maturity.preprocess.scoring import MaturityLabel, ScoredDataset, score_to_label


logger = logging.getLogger(__name__)


class StateLabelMap(BaseModel):
    """labels[k] is the maturity label of HMM state k"""
    model_config = ConfigDict(frozen=True)

    labels: List[MaturityLabel]

    def label_of(self, state: int) -> MaturityLabel:
        return self.labels[state]

    @property
    def n_states(self) -> int:
        return len(self.labels)

    def to_document(self) -> List[str]:
        return [label.display for label in self.labels]

    @classmethod
    def from_document(cls, document: List[str]) -> "StateLabelMap":
        return cls(labels=[MaturityLabel.from_display(name) for name in document])


class MaturityClassification(BaseModel):
    model_config = ConfigDict(frozen=True)

    org_id: str
    dominant: MaturityLabel
    confidence: float
    state_counts: List[int]
    label_counts: Dict[str, int]
    n_observations: int


class TransitionReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    labels: List[str]
    matrix: List[List[float]]
    persistence: Dict[str, float]
    # Long-run share of each label under the fitted chain
    stationary: Dict[str, float]


def state_overall_means(params: HmmParams, weights: Optional[Sequence[float]] = None) -> np.ndarray:
    """Each state's emission mean collapsed to one score, weighted by item count per dimension"""
    w = np.ones(params.dim) if weights is None else np.asarray(weights, dtype=float)
    return params.means @ (w / w.sum())


def map_states(
    params: HmmParams,
    basic_upper: float = 2.5,
    advanced_lower: float = 3.5,
    weights: Optional[Sequence[float]] = None,
) -> StateLabelMap:
    """
    Threshold each state's overall mean. States sharing a band are ordered by mean
    (index on ties) and pushed onto distinct ascending labels.
    """
    overall = state_overall_means(params, weights)
    order = np.argsort(overall, kind="stable")
    bands = [int(score_to_label(float(overall[k]), basic_upper, advanced_lower)) for k in order]

    n = params.n_states
    top = int(MaturityLabel.ADVANCED)
    assigned: List[int] = []
    for i, band in enumerate(bands):
        label = band if i == 0 else max(band, assigned[-1] + 1)
        assigned.append(label)

    if n <= top + 1:
        # Leave room above each state for the ones with higher means
        assigned = [min(label, top - (n - 1 - i)) for i, label in enumerate(assigned)]
    else:
        assigned = [min(label, top) for label in assigned]

    labels: List[MaturityLabel] = [MaturityLabel.BASIC] * n
    for position, state in enumerate(order):
        labels[int(state)] = MaturityLabel(assigned[position])
    return StateLabelMap(labels=labels)


def classify_org(decoded: DecodedStates, label_map: StateLabelMap, org_id: str = "") -> MaturityClassification:
    """Dominant label by decoded-state count (lower maturity on ties); confidence is the mean max posterior"""
    n = label_map.n_states
    states = np.asarray(decoded.states, dtype=int)
    state_counts = np.bincount(states, minlength=n)

    label_totals = np.zeros(len(MaturityLabel), dtype=int)
    for state, count in enumerate(state_counts):
        label_totals[int(label_map.label_of(state))] += count

    dominant = MaturityLabel(int(np.argmax(label_totals)))
    confidence = float(np.mean(np.max(decoded.posteriors, axis=1)))
    return MaturityClassification(
        org_id=org_id,
        dominant=dominant,
        confidence=confidence,
        state_counts=[int(c) for c in state_counts],
        label_counts={label.display: int(label_totals[label]) for label in MaturityLabel},
        n_observations=int(states.size),
    )


def _stationary(A: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    system = np.vstack([A.T - np.eye(n), np.ones((1, n))])
    target = np.concatenate([np.zeros(n), [1.0]])
    solution, *_ = np.linalg.lstsq(system, target, rcond=None)
    solution = np.clip(solution, 0.0, None)
    return solution / solution.sum()


def transition_report(params: HmmParams, label_map: StateLabelMap) -> TransitionReport:
    """Transition matrix with rows and columns in Basic, Developing, Advanced order"""
    order = sorted(range(params.n_states), key=lambda k: (int(label_map.label_of(k)), k))
    names = [label_map.label_of(k).display for k in order]
    if len(set(names)) != len(names):
        names = [f"{name}-{k}" for name, k in zip(names, order)]

    matrix = params.A[np.ix_(order, order)]
    stationary = _stationary(matrix)
    return TransitionReport(
        labels=names,
        matrix=matrix.tolist(),
        persistence={name: float(matrix[i, i]) for i, name in enumerate(names)},
        stationary={name: float(stationary[i]) for i, name in enumerate(names)},
    )


def classify_organizations(
    params: HmmParams,
    dataset: ScoredDataset,
    label_map: StateLabelMap,
    decoder: str = "viterbi",
) -> Tuple[List[MaturityClassification], np.ndarray]:
    """
    Decode every organization's sequence and classify it.
    Also returns the decoded maturity label per dataset row (-1 where the row was not observed).
    """
    row_labels = np.full(len(dataset), -1, dtype=int)
    classifications = []
    for seq in observation_sequences(dataset):
        decoded = decode(params, seq, decoder)
        classification = classify_org(decoded, label_map, seq.org_id)
        classifications.append(classification)
        for position, state in zip(seq.positions, decoded.states):
            row_labels[position] = int(label_map.label_of(int(state)))
        logger.info(
            f"{seq.org_id}: {classification.dominant.display} "
            f"(confidence {classification.confidence:.3f}, {len(seq)} respondents)"
        )

    skipped = int(np.sum(row_labels < 0))
    if skipped:
        logger.warning(f"{skipped} respondents with an absent dimension were left out of HMM decoding")
    return classifications, row_labels
