"""
Fixture script for the bundled synthetic datasets
Regenerates data/fixtures/<scenario>.csv and its ground-truth sidecar from every
scenario under data/scenarios/ with the scenario's pinned seed
"""
import sys
sys.path.append('.')

from pathlib import Path

from maturity.config import DEFAULT_SURVEY_PATH, PACKAGE_ROOT
from maturity.survey.definition import load_survey_definition
from maturity.synth.generator import load_scenario, sample_dataset, write_dataset


SCENARIO_DIR = PACKAGE_ROOT / "data" / "scenarios"
FIXTURE_DIR = PACKAGE_ROOT / "data" / "fixtures"


def generate(scenario_path: Path, survey) -> Path:
    """Write one scenario's CSV and sidecar"""
    spec = load_scenario(scenario_path)
    dataset = sample_dataset(spec, survey)
    target = FIXTURE_DIR / f"{scenario_path.stem}.csv"
    write_dataset(dataset, spec.true_params, target)
    print(f"Generated {target.name}: {spec.n_orgs} organizations x {spec.respondents_per_org} respondents")
    return target


def main():
    """Main fixture function"""
    survey = load_survey_definition(DEFAULT_SURVEY_PATH)

    print("\nGenerating fixtures...")
    print("-" * 50)

    for scenario_path in sorted(SCENARIO_DIR.glob("*.yaml")):
        generate(scenario_path, survey)

    print("-" * 50)
    print("Fixtures generated successfully!")
    print("\nRun the full pipeline with:")
    print("- python -m maturity.main assess --in data/fixtures/developing_dominant.csv --out out/")


if __name__ == "__main__":
    main()
