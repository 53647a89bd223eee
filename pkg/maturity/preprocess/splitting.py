from pydantic import BaseModel, ConfigDict, model_validator
from typing import Dict, List, Sequence
import logging
import math

import numpy as np

from maturity.errors import DataError
from maturity.utils.seeding import make_rng


logger = logging.getLogger(__name__)

SPLIT_STREAM = 0x5EED


class DatasetSplit(BaseModel):
    model_config = ConfigDict(frozen=True)

    train_rows: List[int]
    test_rows: List[int]
    seed: int

    @model_validator(mode="after")
    def check_disjoint(self):
        if set(self.train_rows) & set(self.test_rows):
            raise ValueError("train and test rows overlap")
        return self


def _round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


def stratified_split(labels: Sequence[int], test_fraction: float, seed: int) -> DatasetSplit:
    """
    Class-preserving train/test split.

    Per-class test quotas start at round(count * fraction) and are nudged by largest
    remainder until they hit round(n * fraction). Single-row classes stay in train.
    """
    if not 0.0 < test_fraction < 1.0:
        raise DataError(f"test_fraction must lie in (0, 1), got {test_fraction}", stage="split")
    labels = np.asarray(labels)
    if labels.size == 0:
        raise DataError("cannot split an empty dataset", stage="split")

    classes, counts = np.unique(labels, return_counts=True)
    target = _round_half_up(labels.size * test_fraction)

    quotas: Dict[int, int] = {}
    remainders: Dict[int, float] = {}
    for cls, count in zip(classes.tolist(), counts.tolist()):
        if count < 2:
            logger.warning(f"DegenerateClass: class {cls} has a single row; it stays in the training set")
            quotas[cls] = 0
            remainders[cls] = -math.inf
            continue
        exact = count * test_fraction
        quotas[cls] = min(_round_half_up(exact), count - 1)
        remainders[cls] = exact - quotas[cls]

    capacity = {cls: (count - 1 if count >= 2 else 0) for cls, count in zip(classes.tolist(), counts.tolist())}
    diff = target - sum(quotas.values())
    while diff != 0:
        if diff > 0:
            candidates = [c for c in quotas if quotas[c] < capacity[c]]
            if not candidates:
                break
            # Largest remainder first, lowest class id on ties
            chosen = min(candidates, key=lambda c: (-remainders[c], c))
            quotas[chosen] += 1
            remainders[chosen] -= 1.0
            diff -= 1
        else:
            candidates = [c for c in quotas if quotas[c] > 0]
            if not candidates:
                break
            chosen = min(candidates, key=lambda c: (remainders[c], c))
            quotas[chosen] -= 1
            remainders[chosen] += 1.0
            diff += 1

    rng = make_rng(seed, SPLIT_STREAM)
    test_rows: List[int] = []
    for cls in classes.tolist():
        members = np.flatnonzero(labels == cls)
        picked = rng.permutation(members)[: quotas[cls]]
        test_rows.extend(int(i) for i in picked)

    test_set = set(test_rows)
    train_rows = [i for i in range(labels.size) if i not in test_set]
    return DatasetSplit(train_rows=train_rows, test_rows=sorted(test_rows), seed=seed)
