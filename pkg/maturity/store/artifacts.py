"""
JSON persistence for every model and report the pipeline emits.

Documents are written with sorted keys, 2-space indent and NaN mapped to null, so the
same inputs always produce the same bytes. Floats use the shortest repr that
round-trips, which keeps serialized models lossless.
"""
from typing import Any, Dict, Tuple, Union
from pathlib import Path
import hashlib
import json
import logging
import math

import numpy as np

from maturity.errors import FileUnreadable, SchemaMismatch
from maturity.forest.ensemble import Forest
from maturity.hmm.classification import StateLabelMap
from maturity.hmm.params import HmmParams
from maturity.preprocess.scoring import ScoredDataset


logger = logging.getLogger(__name__)

REPORT_JSON = "report.json"
REPORT_TEXT = "report.txt"
DATASET_JSON = "scored_dataset.json"
HMM_JSON = "hmm_model.json"
FOREST_JSON = "forest.json"


def to_plain(value: Any) -> Any:
    """Recursively convert numpy values to builtins and NaN/inf to None"""
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_plain(value.tolist())
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def dumps(document: Any) -> str:
    return json.dumps(to_plain(document), indent=2, sort_keys=True, allow_nan=False, ensure_ascii=False) + "\n"


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path: Union[str, Path]) -> str:
    try:
        return sha256_bytes(Path(path).read_bytes())
    except OSError as e:
        raise FileUnreadable(f"Cannot read {path}: {e}")


class ArtifactStore:
    """Reads and writes pipeline artifacts under one output directory"""

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)

    def path(self, name: str) -> Path:
        return self.root / name

    def write_json(self, name: str, document: Any) -> Path:
        target = self.path(name)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(dumps(document), encoding="utf-8")
        logger.debug(f"Wrote {target}")
        return target

    def write_text(self, name: str, text: str) -> Path:
        target = self.path(name)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(text, encoding="utf-8")
        return target

    def read_json(self, name: str) -> Dict[str, Any]:
        return read_json(self.path(name))

    def exists(self, name: str) -> bool:
        return self.path(name).is_file()

    # Models
    def save_hmm(self, params: HmmParams, label_map: StateLabelMap, seed: int) -> Path:
        document = params.to_document()
        document.update({"seed": seed, "label_map": label_map.to_document()})
        return self.write_json(HMM_JSON, document)

    def load_hmm(self) -> Tuple[HmmParams, StateLabelMap, int]:
        document = self.read_json(HMM_JSON)
        try:
            return (
                HmmParams.from_document(document),
                StateLabelMap.from_document(document["label_map"]),
                int(document["seed"]),
            )
        except (KeyError, ValueError) as e:
            raise SchemaMismatch(f"{self.path(HMM_JSON)} is not an HMM model document: {e}", stage="load")

    def save_forest(self, forest: Forest) -> Path:
        return self.write_json(FOREST_JSON, forest.to_document())

    def load_forest(self) -> Forest:
        return load_forest(self.path(FOREST_JSON))

    def save_dataset(self, dataset: ScoredDataset) -> Path:
        return self.write_json(DATASET_JSON, dataset.to_document())

    def load_dataset(self) -> ScoredDataset:
        return load_scored_dataset(self.path(DATASET_JSON))


def read_json(path: Union[str, Path]) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle)
    except OSError as e:
        raise FileUnreadable(f"Cannot read {path}: {e}")
    except json.JSONDecodeError as e:
        raise SchemaMismatch(f"{path} is not valid JSON: {e}", stage="load")


def load_forest(path: Union[str, Path]) -> Forest:
    document = read_json(path)
    try:
        return Forest.from_document(document)
    except (KeyError, ValueError, TypeError) as e:
        raise SchemaMismatch(f"{path} is not a forest document: {e}", stage="load")


def load_scored_dataset(path: Union[str, Path]) -> ScoredDataset:
    document = read_json(path)
    try:
        return ScoredDataset.from_document(document)
    except (KeyError, ValueError, TypeError) as e:
        raise SchemaMismatch(f"{path} is not a scored dataset document: {e}", stage="load")


def is_scored_dataset(path: Union[str, Path]) -> bool:
    return Path(path).suffix.lower() == ".json"


def write_document(path: Union[str, Path], document: Any) -> Path:
    """Write one JSON document outside a store directory, creating parent directories"""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(dumps(document), encoding="utf-8")
    return target
