"""
Export pydantic's JSON Schema of every report document the CLI emits, and check the
hand-maintained assessment schema in data/schema/ still lists every report field
"""
import sys
sys.path.append('.')

import json

from maturity.report.models import AssessmentReport, ExplainReport, ValidationReport
from maturity.report.schema import ASSESSMENT_SCHEMA, SCHEMA_DIR, load_schema


GENERATED_DIR = SCHEMA_DIR / "generated"
REPORTS = {
    "assessment_report": AssessmentReport,
    "validation_report": ValidationReport,
    "explain_report": ExplainReport,
}


def missing_sections():
    shipped = load_schema(ASSESSMENT_SCHEMA)
    return sorted(set(AssessmentReport.model_fields) - set(shipped["required"]))


def main():
    GENERATED_DIR.mkdir(parents=True, exist_ok=True)
    for name, model in REPORTS.items():
        target = GENERATED_DIR / f"{name}.schema.json"
        target.write_text(json.dumps(model.model_json_schema(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        print(f"Wrote {target}")

    print("-" * 50)
    missing = missing_sections()
    if missing:
        print(f"[ERROR] {ASSESSMENT_SCHEMA.name} does not require: {', '.join(missing)}")
        sys.exit(1)
    print(f"[OK] {ASSESSMENT_SCHEMA.name} covers every report section")


if __name__ == "__main__":
    main()
