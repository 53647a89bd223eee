from pydantic import BaseModel, ValidationError, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict
from typing import Dict, Literal, Optional, Union
from configparser import ConfigParser, Error as ConfigParserError
from pathlib import Path
from dotenv import load_dotenv

from maturity.errors import ConfigError


PACKAGE_ROOT = Path(__file__).resolve().parent.parent
DEFAULT_SURVEY_PATH = PACKAGE_ROOT / "data" / "survey_definition.yaml"


class PreprocessSettings(BaseModel):
    # Rows with more absent answers than this share are dropped during cleaning
    max_missing_fraction: float = 0.5
    test_fraction: float = 0.2

    # Maturity thresholds on the 1-5 composite scale
    basic_upper: float = 2.5
    advanced_lower: float = 3.5

    @model_validator(mode="after")
    def check_thresholds(self):
        if not 0.0 <= self.max_missing_fraction <= 1.0:
            raise ValueError("max_missing_fraction must lie in [0, 1]")
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must lie in (0, 1)")
        if self.basic_upper > self.advanced_lower:
            raise ValueError("basic_upper must not exceed advanced_lower")
        return self


class HmmSettings(BaseModel):
    n_states: int = 3
    tol: float = 1e-6
    max_iter: int = 500
    variance_floor: float = 1e-4
    n_restarts: int = 5
    # Train on one vertically stacked stream instead of one sequence per organization
    stacked: bool = False
    decoder: Literal["viterbi", "map"] = "viterbi"


class ForestSettings(BaseModel):
    n_trees: int = 100
    max_depth: int = 10
    min_samples_leaf: int = 1
    cv_folds: int = 5
    include_hmm_state: bool = True


class ExplainSettings(BaseModel):
    background_size: int = 100
    lime_samples: int = 1000
    lime_kernel_width: Optional[float] = None  # None -> 0.75 * sqrt(n_features)
    ridge_alpha: float = 1.0
    top_k: int = 10
    correlation_top_n: int = 10
    target_class: Literal["Basic", "Developing", "Advanced"] = "Advanced"


class ReportSettings(BaseModel):
    top_n: int = 10


class Settings(BaseSettings):
    seed: int = 42
    log_level: str = "INFO"
    survey_path: Path = DEFAULT_SURVEY_PATH

    preprocess: PreprocessSettings = PreprocessSettings()
    hmm: HmmSettings = HmmSettings()
    forest: ForestSettings = ForestSettings()
    explain: ExplainSettings = ExplainSettings()
    report: ReportSettings = ReportSettings()

    model_config = SettingsConfigDict(
        # Load from .env
        env_file=".env",
        env_prefix="MATURITY_",
        env_nested_delimiter="__",
        case_sensitive=False,
        extra="ignore",
    )


SECTIONS = ("preprocess", "hmm", "forest", "explain", "report")
TOP_LEVEL_KEYS = ("seed", "log_level", "survey_path")


def read_config_file(path: Union[str, Path]) -> Dict[str, Dict[str, str]]:
    """
    Read a flat INI config whose sections mirror the module names.
    Top-level keys live in a [pipeline] section.
    """
    parser = ConfigParser()
    try:
        with open(path, "r", encoding="utf-8") as handle:
            parser.read_file(handle)
    except OSError as e:
        raise ConfigError(f"Cannot read config file {path}: {e}")
    except ConfigParserError as e:
        raise ConfigError(f"Malformed config file {path}: {e}")

    overrides: Dict[str, Dict[str, str]] = {}
    for section in parser.sections():
        if section == "pipeline":
            for key, value in parser.items(section):
                if key not in TOP_LEVEL_KEYS:
                    raise ConfigError(f"Unknown key '{key}' in section [pipeline]")
                overrides[key] = value
            continue

        if section not in SECTIONS:
            raise ConfigError(f"Unknown config section [{section}]")

        known = Settings.model_fields[section].annotation.model_fields
        values = {}
        for key, value in parser.items(section):
            if key not in known:
                raise ConfigError(f"Unknown key '{key}' in section [{section}]")
            # Empty value resets optional fields such as lime_kernel_width
            values[key] = value if value != "" else None
        overrides[section] = values
    return overrides


def load_settings(config_path: Optional[Union[str, Path]] = None, **extra) -> Settings:
    """Build settings from defaults, environment, an optional INI file and explicit overrides"""
    overrides: Dict = {}
    if config_path is not None:
        overrides.update(read_config_file(config_path))
    for key, value in extra.items():
        if value is not None:
            overrides[key] = value

    try:
        return Settings(**overrides)
    except ValidationError as e:
        raise ConfigError(f"Invalid configuration: {e.errors()[0]['msg']}")


# Ensure .env is loaded before instantiating settings
load_dotenv()
settings = Settings()
