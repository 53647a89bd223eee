from typing import Optional


class MaturityError(Exception):
    """Base error for every pipeline failure surfaced to the CLI"""

    exit_code: int = 2
    default_stage: str = "pipeline"

    def __init__(self, message: str, stage: Optional[str] = None, row: Optional[int] = None):
        super().__init__(message)
        self.message = message
        self.stage = stage or self.default_stage
        self.row = row

    @property
    def kind(self) -> str:
        return type(self).__name__

    def __str__(self) -> str:
        if self.row is not None:
            return f"{self.kind} (row {self.row}): {self.message}"
        return f"{self.kind}: {self.message}"


class UsageError(MaturityError):
    exit_code = 1
    default_stage = "cli"


class DataError(MaturityError):
    exit_code = 2


class NumericError(MaturityError):
    exit_code = 3


# Usage
class UnknownSelector(UsageError):
    default_stage = "explain"


class ConfigError(UsageError):
    default_stage = "config"


# Survey / recoding
class UnknownLabel(DataError):
    default_stage = "recode"


class OutOfScale(DataError):
    default_stage = "recode"


class WrongScale(DataError):
    default_stage = "preprocess"


class SurveyDefinitionInvalid(DataError):
    default_stage = "survey"


# Loading / preprocessing
class FileUnreadable(DataError):
    default_stage = "load"


class SchemaMismatch(DataError):
    default_stage = "load"


class DuplicateKey(DataError):
    default_stage = "load"


class EmptyDataset(DataError):
    default_stage = "preprocess"


class AllItemsMissing(DataError):
    default_stage = "preprocess"


# Forest
class SingleClass(DataError):
    default_stage = "forest"


class EmptyData(DataError):
    default_stage = "forest"


class DimensionMismatch(DataError):
    default_stage = "forest"


class LengthMismatch(DataError):
    default_stage = "evaluate"


class TooFewRows(DataError):
    default_stage = "cross_validate"


# Explain
class EmptyBackground(DataError):
    default_stage = "explain"


class TooManyFeatures(DataError):
    default_stage = "explain"


class ZeroVariance(DataError):
    default_stage = "explain"


# Synthetic data
class ScenarioInvalid(DataError):
    default_stage = "synth"


# Numeric
class NumericUnderflow(NumericError):
    default_stage = "hmm"


class NonFinite(NumericError):
    default_stage = "hmm"


# Report
class ReportSchemaViolation(DataError):
    default_stage = "report"
