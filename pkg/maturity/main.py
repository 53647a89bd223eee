"""
Command-line entry point: assess | validate | explain | synth | recode.

Reports go to stdout (or --out); logs go to stderr. Exit codes: 0 ok, 1 usage,
2 data, 3 numeric.
"""
from typing import List, Optional
from pathlib import Path
import argparse
import logging
import sys

from maturity import __version__
from maturity.config import Settings, load_settings
from maturity.errors import MaturityError, UsageError
from maturity.report.pipeline import AssessmentPipeline
from maturity.report.text import render_assessment, render_explain, render_scored, render_validation
from maturity.store.artifacts import DATASET_JSON, dumps, write_document
from maturity.survey.definition import load_survey_definition
from maturity.synth.generator import load_scenario, sample_dataset, write_dataset
from maturity.utils.log_utils import configure_logging


logger = logging.getLogger("maturity.main")


class CommandParser(argparse.ArgumentParser):
    """Argument errors become UsageError so every failure exits through one handler"""

    def error(self, message: str):
        raise UsageError(message)


def build_parser() -> CommandParser:
    parser = CommandParser(prog="maturity", description="Insider threat maturity assessment pipeline")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--in", dest="input", required=True, help="input CSV, scored dataset JSON or scenario YAML")
    common.add_argument("--out", help="output directory (assess) or file")
    common.add_argument("--survey", help="survey definition YAML")
    common.add_argument("--config", help="INI file with per-module settings")
    common.add_argument("--seed", type=int, help="master seed (default 42; synth defaults to the scenario seed)")
    common.add_argument("--format", choices=("json", "text"), default="json")
    common.add_argument("--top", type=int, help="number of ranked features to report")

    commands = parser.add_subparsers(dest="command", required=True, parser_class=CommandParser)
    commands.add_parser("assess", parents=[common], help="run every stage and write all artifacts")
    commands.add_parser("validate", parents=[common], help="train and evaluate the forest")
    explain = commands.add_parser("explain", parents=[common], help="SHAP and LIME for a serialized forest")
    explain.add_argument("--model", required=True, help="directory holding forest.json and hmm_model.json")
    explain.add_argument("--select", help="org:<id> or row:<index>")
    commands.add_parser("synth", parents=[common], help="generate a synthetic dataset from a scenario")
    commands.add_parser("recode", parents=[common], help="clean, recode and score a response CSV")
    return parser


def resolve_settings(args: argparse.Namespace) -> Settings:
    # synth falls back to the scenario seed, so it never injects the default
    seed = args.seed if args.command != "synth" else None
    return load_settings(args.config, seed=seed, survey_path=args.survey)


def emit(text: str, out: Optional[str]) -> None:
    if not out:
        sys.stdout.write(text)
        return
    target = Path(out)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(text, encoding="utf-8")


def run(args: argparse.Namespace) -> int:
    settings = resolve_settings(args)
    configure_logging(settings.log_level)
    top = args.top
    if top is not None and top < 1:
        raise UsageError("--top must be at least 1")

    if args.command == "synth":
        survey = load_survey_definition(settings.survey_path)
        spec = load_scenario(args.input)
        if args.seed is not None:
            spec = spec.with_seed(args.seed)
        dataset = sample_dataset(spec, survey)
        if args.out:
            sidecar = write_dataset(dataset, spec.true_params, args.out)
            logger.info(f"Wrote {args.out} and {sidecar}")
        else:
            sys.stdout.write(dataset.to_csv())
        return 0

    pipeline = AssessmentPipeline(settings)

    if args.command == "assess":
        result = pipeline.assess(args.input, top)
        text = render_assessment(result.report)
        if args.out:
            pipeline.save_assessment(result, args.out, text)
        sys.stdout.write(dumps(result.report.model_dump(mode="json")) if args.format == "json" else text)
        return 0

    if args.command == "validate":
        report = pipeline.validate(args.input, top)
        emit(dumps(report.model_dump(mode="json")) if args.format == "json" else render_validation(report), args.out)
        return 0

    if args.command == "explain":
        report = pipeline.explain(args.input, args.model, args.select, top)
        emit(dumps(report.model_dump(mode="json")) if args.format == "json" else render_explain(report), args.out)
        return 0

    dataset = pipeline.recode(args.input)
    if args.out:
        target = args.out if args.out.endswith(".json") else f"{args.out.rstrip('/')}/{DATASET_JSON}"
        write_document(target, dataset.to_document())
        logger.info(f"Scored dataset written to {target}")
    if args.format == "text":
        sys.stdout.write(render_scored(dataset))
    elif not args.out:
        sys.stdout.write(dumps(dataset.to_document()))
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    configure_logging("INFO")
    try:
        args = build_parser().parse_args(argv)
        return run(args)
    except MaturityError as e:
        context = f" (row {e.row})" if e.row is not None else ""
        logger.error(f"{e.stage}: {e.kind}: {e.message}{context}")
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
