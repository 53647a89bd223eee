from pydantic import BaseModel, ConfigDict, model_validator
from typing import Any, Dict, List, Optional

import numpy as np

from maturity.preprocess.scoring import ScoredDataset


STOCHASTIC_TOL = 1e-9
DEFAULT_VARIANCE_FLOOR = 1e-4


class HmmParams(BaseModel):
    """Diagonal-covariance Gaussian HMM: pi, A, per-state means and variances"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    pi: np.ndarray
    A: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    @model_validator(mode="after")
    def check_shapes(self):
        n = self.pi.shape[0]
        if self.pi.ndim != 1 or self.A.shape != (n, n):
            raise ValueError("pi must be [n] and A must be [n x n]")
        if self.means.ndim != 2 or self.means.shape[0] != n or self.variances.shape != self.means.shape:
            raise ValueError("means and variances must both be [n_states x dim]")
        if np.any(self.pi < 0) or np.any(self.A < 0):
            raise ValueError("probabilities must be non-negative")
        if abs(self.pi.sum() - 1.0) > STOCHASTIC_TOL:
            raise ValueError(f"pi sums to {self.pi.sum()!r}, not 1")
        if np.any(np.abs(self.A.sum(axis=1) - 1.0) > STOCHASTIC_TOL):
            raise ValueError("every row of A must sum to 1")
        if np.any(self.variances <= 0):
            raise ValueError("variances must be positive")
        return self

    @property
    def n_states(self) -> int:
        return self.pi.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def permuted(self, order: List[int]) -> "HmmParams":
        """Same model with states relabelled so new state k is old state order[k]"""
        order = np.asarray(order)
        return HmmParams(
            pi=self.pi[order],
            A=self.A[np.ix_(order, order)],
            means=self.means[order],
            variances=self.variances[order],
        )

    def to_document(self) -> Dict[str, Any]:
        return {
            "n_states": self.n_states,
            "dim": self.dim,
            "pi": self.pi.tolist(),
            "A": self.A.tolist(),
            "means": self.means.tolist(),
            "variances": self.variances.tolist(),
        }

    @classmethod
    def from_document(cls, document: Dict[str, Any]) -> "HmmParams":
        return cls(
            pi=np.asarray(document["pi"], dtype=float),
            A=np.asarray(document["A"], dtype=float),
            means=np.asarray(document["means"], dtype=float),
            variances=np.asarray(document["variances"], dtype=float),
        )


class ObservationSequence(BaseModel):
    """One organization's composite-score vectors in file order"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    org_id: str
    obs: np.ndarray
    # Dataset row positions of each observation, for writing decoded states back
    positions: Optional[List[int]] = None

    @model_validator(mode="after")
    def check_obs(self):
        if self.obs.ndim != 2 or self.obs.shape[0] < 1:
            raise ValueError("observation sequence must be a non-empty [T x dim] matrix")
        if not np.all(np.isfinite(self.obs)):
            raise ValueError("observations must be finite")
        return self

    def __len__(self) -> int:
        return self.obs.shape[0]


class DecodedStates(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    states: np.ndarray
    posteriors: np.ndarray
    log_likelihood: float


def observation_sequences(dataset: ScoredDataset) -> List[ObservationSequence]:
    """
    One sequence per organization from the four composite dimensions.
    Respondents with an absent dimension are left out.
    """
    dims = dataset.dimension_matrix()
    complete = ~np.isnan(dims).any(axis=1)
    sequences = []
    for org_id in dataset.organizations:
        positions = [i for i, org in enumerate(dataset.org_index) if org == org_id and complete[i]]
        if positions:
            sequences.append(ObservationSequence(org_id=org_id, obs=dims[positions], positions=positions))
    return sequences


def stack_sequences(sequences: List[ObservationSequence]) -> ObservationSequence:
    """Vertically stack every sequence into one stream"""
    positions: List[int] = []
    for seq in sequences:
        positions.extend(seq.positions or [])
    return ObservationSequence(
        org_id="*",
        obs=np.vstack([seq.obs for seq in sequences]),
        positions=positions or None,
    )
