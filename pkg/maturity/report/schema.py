"""
Check emitted report documents against the JSON Schema shipped in data/schema/
"""
from typing import Any, Dict, Union
from pathlib import Path
from functools import lru_cache
import json

from jsonschema import Draft202012Validator
from jsonschema.exceptions import SchemaError

from maturity.config import PACKAGE_ROOT
from maturity.errors import FileUnreadable, ReportSchemaViolation
from maturity.store.artifacts import to_plain


SCHEMA_DIR = PACKAGE_ROOT / "data" / "schema"
ASSESSMENT_SCHEMA = SCHEMA_DIR / "assessment_report.schema.json"


@lru_cache(maxsize=None)
def load_schema(path: Union[str, Path] = ASSESSMENT_SCHEMA) -> Dict[str, Any]:
    try:
        schema = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as e:
        raise FileUnreadable(f"Cannot read report schema {path}: {e}", stage="report")
    try:
        Draft202012Validator.check_schema(schema)
    except SchemaError as e:
        raise ReportSchemaViolation(f"{path} is not a valid JSON Schema: {e.message}")
    return schema


def check_report(document: Any, path: Union[str, Path] = ASSESSMENT_SCHEMA) -> None:
    """Raise ReportSchemaViolation naming the first offending location, if any"""
    validator = Draft202012Validator(load_schema(path))
    errors = sorted(validator.iter_errors(to_plain(document)), key=lambda e: [str(p) for p in e.absolute_path])
    if errors:
        first = errors[0]
        location = "/".join(str(part) for part in first.absolute_path) or "<root>"
        raise ReportSchemaViolation(f"report fails {Path(path).name} at {location}: {first.message}")
