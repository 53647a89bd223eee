"""
LIME-style local explanations: perturb an instance in standardized feature space,
weight samples with an exponential kernel and fit a weighted ridge surrogate.
"""
from pydantic import BaseModel, ConfigDict
from typing import Callable, List, Optional, Sequence
import logging
import math

import numpy as np
from sklearn.linear_model import Ridge

from maturity.errors import DataError, DimensionMismatch
from maturity.utils.seeding import derive_seed


logger = logging.getLogger(__name__)

MIN_SAMPLES = 50
DEGENERATE_SPREAD = 1e-12


class TrainingStats(BaseModel):
    model_config = ConfigDict(frozen=True)

    mean: List[float]
    std: List[float]
    feature_names: Optional[List[str]] = None

    @classmethod
    def from_matrix(cls, X: np.ndarray, feature_names: Optional[Sequence[str]] = None) -> "TrainingStats":
        X = np.asarray(X, dtype=float)
        present = ~np.isnan(X).all(axis=0)
        mean = np.zeros(X.shape[1])
        std = np.zeros(X.shape[1])
        mean[present] = np.nanmean(X[:, present], axis=0)
        std[present] = np.nanstd(X[:, present], axis=0)
        return cls(
            mean=mean.tolist(),
            std=std.tolist(),
            feature_names=list(feature_names) if feature_names is not None else None,
        )


class FeatureWeight(BaseModel):
    model_config = ConfigDict(frozen=True)

    feature: str
    index: int
    coefficient: float


class LimeExplanation(BaseModel):
    model_config = ConfigDict(frozen=True)

    weights: List[FeatureWeight]
    intercept: float
    kernel_width: float
    n_samples: int
    fidelity: float
    # Constant model output around x; every weight is 0
    degenerate: bool = False
    instance: Optional[str] = None


def standardize(x: np.ndarray, stats: TrainingStats) -> np.ndarray:
    """x in training-std units; absent values and zero-spread features map to 0"""
    mean = np.asarray(stats.mean, dtype=float)
    std = np.asarray(stats.std, dtype=float)
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != mean.shape[0]:
        raise DimensionMismatch(f"instance has {x.shape[0]} features, stats describe {mean.shape[0]}", stage="explain")
    frozen = ~(std > 0)
    z = np.where(frozen, 0.0, (np.where(np.isnan(x), mean, x) - mean) / np.where(frozen, 1.0, std))
    return z


def lime_contributions(explanation: LimeExplanation, x: np.ndarray, stats: TrainingStats) -> np.ndarray:
    """Surrogate term coefficient * standardized value per feature; features outside the explanation give 0"""
    z = standardize(x, stats)
    contributions = np.zeros(z.shape[0])
    for weight in explanation.weights:
        contributions[weight.index] = weight.coefficient * z[weight.index]
    return contributions


def default_kernel_width(n_features: int) -> float:
    return 0.75 * math.sqrt(n_features)


def lime_explain(
    model: Callable[[np.ndarray], np.ndarray],
    x: np.ndarray,
    stats: TrainingStats,
    n_samples: int = 1000,
    kernel_width: Optional[float] = None,
    k: int = 10,
    seed: int = 42,
    ridge_alpha: float = 1.0,
    instance: Optional[str] = None,
) -> LimeExplanation:
    """
    Local surrogate around x. `model` maps [n x M] rows to n scalar outputs.
    Coefficients are per standardized unit; features with zero training spread stay fixed.
    """
    if n_samples < MIN_SAMPLES:
        raise DataError(f"LIME needs at least {MIN_SAMPLES} samples, got {n_samples}", stage="explain")
    mean = np.asarray(stats.mean, dtype=float)
    std = np.asarray(stats.std, dtype=float)
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != mean.shape[0]:
        raise DimensionMismatch(f"instance has {x.shape[0]} features, stats describe {mean.shape[0]}", stage="explain")

    n_features = x.shape[0]
    width = kernel_width if kernel_width is not None else default_kernel_width(n_features)
    names = stats.feature_names or [f"x{j}" for j in range(n_features)]

    x = np.where(np.isnan(x), mean, x)
    frozen = ~(std > 0)
    scale = np.where(frozen, 1.0, std)
    x_std = standardize(x, stats)

    rng = np.random.default_rng(derive_seed(seed, 0))
    Z = x_std[None, :] + rng.standard_normal((n_samples, n_features))
    Z[:, frozen] = 0.0
    Z[0] = x_std
    samples = Z * scale[None, :] + mean[None, :]
    samples[:, frozen] = x[frozen]

    outputs = np.asarray(model(samples), dtype=float).reshape(-1)
    distance = np.linalg.norm(Z - x_std[None, :], axis=1)
    kernel = np.exp(-(distance ** 2) / width ** 2)

    if np.ptp(outputs) < DEGENERATE_SPREAD:
        logger.warning(f"DegenerateModel: constant output {outputs[0]:.6g} around {instance or 'instance'}")
        return LimeExplanation(
            weights=[FeatureWeight(feature=names[j], index=j, coefficient=0.0) for j in range(min(k, n_features))],
            intercept=float(outputs[0]),
            kernel_width=width,
            n_samples=n_samples,
            fidelity=0.0,
            degenerate=True,
            instance=instance,
        )

    surrogate = Ridge(alpha=ridge_alpha)
    surrogate.fit(Z, outputs, sample_weight=kernel)
    fidelity = max(0.0, float(surrogate.score(Z, outputs, sample_weight=kernel)))

    coefficients = surrogate.coef_
    order = np.argsort(-np.abs(coefficients), kind="stable")[:k]
    return LimeExplanation(
        weights=[FeatureWeight(feature=names[j], index=int(j), coefficient=float(coefficients[j])) for j in order],
        intercept=float(surrogate.intercept_),
        kernel_width=width,
        n_samples=n_samples,
        fidelity=min(fidelity, 1.0),
        instance=instance,
    )
