"""
Configuration settings for the neighborhood vibrancy analysis toolkit.
"""
import os
import logging
from datetime import date
from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Optional, Tuple, Union

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .exceptions import ConfigurationError, MissingInputError

# Load environment variables from .env file
load_dotenv()

# Configure logger
logger = logging.getLogger("vibrancy.config")

CONFIG_DIR = Path(__file__).resolve().parent.parent / "config"
EVENT_TYPES_FILE = Path(os.getenv("VIBRANCY_EVENT_TYPES_FILE", str(CONFIG_DIR / "event_types.yaml")))
CRIME_TYPES_FILE = Path(os.getenv("VIBRANCY_CRIME_TYPES_FILE", str(CONFIG_DIR / "crime_types.yaml")))

CONFIG_SCHEMA_VERSION = 1

# Run defaults - use environment variables if available
DEFAULT_OUT_DIR = os.getenv("VIBRANCY_OUT_DIR", "output")
DEFAULT_JOBS = int(os.getenv("VIBRANCY_JOBS", "1"))
DEFAULT_ALPHA = float(os.getenv("VIBRANCY_ALPHA", "0.05"))
DEFAULT_MANY_TO_ONE_RATIO = float(os.getenv("VIBRANCY_MANY_TO_ONE_RATIO", "3.0"))
DEFAULT_MATCH_ON = os.getenv("VIBRANCY_MATCH_ON", "logit")
DEFAULT_LOG_LEVEL = os.getenv("VIBRANCY_LOG_LEVEL", "INFO")
_caliper_env = os.getenv("VIBRANCY_CALIPER", "")
DEFAULT_CALIPER = float(_caliper_env) if _caliper_env else None

# Study windows
DEFAULT_PERMIT_WINDOW = (date(2006, 1, 1), date(2016, 5, 31))
DEFAULT_CRIME_WINDOW = (date(2006, 1, 1), date(2015, 12, 31))

# Iterative fitting settings
MAX_ITERATIONS = int(os.getenv("VIBRANCY_MAX_ITERATIONS", "100"))
THETA_BOUNDARY = 1e6

LAND_USE_CATEGORIES = (
    "commercial", "residential", "vacant", "transportation",
    "industrial", "park", "civic", "other",
)
RACE_COLUMNS = ("prop_white", "prop_black", "prop_asian", "prop_hispanic", "prop_other")

# Regression covariates X_i in reporting order; white and other race proportions are the reference
REGRESSION_COVARIATES = (
    "log_income", "poverty_index", "log_population", "prop_black", "prop_hispanic",
    "area_1e6", "prop_commercial", "prop_residential", "prop_vacant",
    "prop_transportation", "prop_industrial", "prop_park", "prop_civic",
)

# Fallback event taxonomy if the YAML file is missing
DEFAULT_EVENT_TYPES: Dict[str, Dict[str, List[str]]] = {
    "regular": {
        "public_holiday": [
            "4th of July", "Labor Day", "Memorial Day", "New Year's Day", "New Year's Eve",
            "May Day", "Christmas Party", "Father's Day", "Mother's Day", "Halloween Party",
        ],
        "religious": ["Church Service", "Communion", "Religious Event"],
    },
    "spontaneous": {
        "community": [
            "Community Fun Day", "Easter Egg Hunt", "National Night Out", "Prom",
            "Spring Festival", "Arts & Crafts Show", "Health Fair",
            "Stop The Violence Crusade", "Dedication", "Serenade",
        ],
        "personal": [
            "Baby Shower", "Birthday Party", "Graduation Party", "Repass",
            "Wedding Reception", "Wedding",
        ],
    },
}

# Fallback crime whitelist (UCR grouping) if the YAML file is missing
DEFAULT_CRIME_TYPES: Dict[str, List[str]] = {
    "violent": [
        "Homicide", "Homicide - Criminal", "Homicide - Justifiable", "Homicide - Gross Negligence",
        "Rape", "Sex Crime", "Robbery", "Robbery Firearm", "Robbery No Firearm",
        "Aggravated Assault", "Aggravated Assault Firearm", "Aggravated Assault No Firearm",
    ],
    "nonviolent": [
        "Burglary", "Burglary Residential", "Burglary Non-Residential",
        "Theft", "Thefts", "Theft from Vehicle", "Motor Vehicle Theft",
    ],
    "vice": [
        "Drug Violation", "Narcotic / Drug Law Violations", "Gambling", "Gambling Violations",
        "Prostitution", "Prostitution and Commercialized Vice",
    ],
    "other": [
        "Vandalism", "Vandalism/Criminal Mischief", "Other Assaults", "Simple Assault",
        "Fraud", "Forgery and Counterfeiting", "Embezzlement", "Receiving Stolen Property",
        "Weapon Violations", "Arson", "Disorderly Conduct", "DRIVING UNDER THE INFLUENCE",
        "Liquor Law Violations", "Public Drunkenness", "Vagrancy/Loitering",
        "Offenses Against Family and Children", "Other Sex Offenses (Not Commercialized)",
        "Recovered Stolen Motor Vehicle", "All Other Offenses",
    ],
}


def _load_yaml_resource(path: Path, fallback: Any, label: str) -> Any:
    """Load a bundled YAML resource, falling back to the hardcoded default."""
    try:
        if path.exists():
            with open(path, "r", encoding="utf-8") as f:
                data = yaml.safe_load(f)
            if not isinstance(data, dict) or not data:
                raise ConfigurationError(f"{label} file {path} must contain a non-empty mapping")
            return data
        logger.warning(f"{label} file not found at {path}, using built-in defaults")
        return fallback
    except yaml.YAMLError as e:
        raise ConfigurationError(f"Invalid YAML in {label} file {path}: {str(e)}")


def load_event_types(path: Optional[Union[str, Path]] = None) -> Dict[str, Dict[str, List[str]]]:
    """
    Load the permit event taxonomy: category -> sub-category -> labels.

    Args:
        path: YAML file to read; defaults to the bundled config/event_types.yaml

    Returns:
        dict: mapping with top-level keys 'regular' and 'spontaneous'
    """
    data = _load_yaml_resource(Path(path) if path else EVENT_TYPES_FILE, DEFAULT_EVENT_TYPES, "Event types")
    unknown = set(data) - {"regular", "spontaneous"}
    if unknown:
        raise ConfigurationError(f"Event types file has unknown categories: {', '.join(sorted(unknown))}")
    return data


def load_crime_types(path: Optional[Union[str, Path]] = None) -> Dict[str, List[str]]:
    """
    Load the crime whitelist: category -> labels.

    Args:
        path: YAML file to read; defaults to the bundled config/crime_types.yaml

    Returns:
        dict: mapping with keys among 'violent', 'nonviolent', 'vice', 'other'
    """
    data = _load_yaml_resource(Path(path) if path else CRIME_TYPES_FILE, DEFAULT_CRIME_TYPES, "Crime types")
    unknown = set(data) - {"violent", "nonviolent", "vice", "other"}
    if unknown:
        raise ConfigurationError(f"Crime types file has unknown categories: {', '.join(sorted(unknown))}")
    return data


# Covariates the synthetic generator can put into its linear predictors (standardized)
SYNTH_COVARIATES = (
    "income", "population", "poverty", "black", "hispanic",
    "commercial", "residential", "vacant", "park",
)


class CityConfig(BaseModel):
    """Parameters of a synthetic city; the seed fully determines the draw."""
    model_config = ConfigDict(extra="forbid")

    n_blockgroups: int = Field(400, ge=4)
    grid_cols: Optional[int] = Field(None, ge=1)
    cell_size_deg: float = Field(0.005, gt=0)
    origin_lon: float = Field(-75.28, ge=-180, le=180)
    origin_lat: float = Field(39.87, ge=-90, le=90)
    seed: int = Field(0, ge=0, lt=2 ** 64)
    first_year: int = 2006
    last_year: int = 2015

    # covariate distributions
    income_log_mean: float = 10.6
    income_log_sd: float = Field(0.5, gt=0)
    population_log_mean: float = 7.0
    population_log_sd: float = Field(0.35, gt=0)
    race_alpha: Tuple[float, float, float, float, float] = (3.0, 3.0, 0.4, 0.8, 0.3)
    landuse_alpha: Tuple[float, float, float, float, float, float, float, float] = (
        1.0, 4.0, 0.6, 0.5, 0.4, 0.5, 0.4, 0.6,
    )

    # permit intensity: log expected events over the whole window
    event_intercept: float = 3.5
    event_coefs: Dict[str, float] = Field(default_factory=lambda: {"income": -0.3, "black": 0.3})
    spontaneity_intercept: float = 2.5
    spontaneity_coefs: Dict[str, float] = Field(default_factory=dict)
    warm_month_multiplier: float = Field(2.5, gt=0)

    # crime model: log expected crimes over the whole window
    crime_intercept: float = 5.5
    crime_coefs: Dict[str, float] = Field(
        default_factory=lambda: {"income": -0.3, "population": 0.5, "commercial": 0.3}
    )
    treatment_effect: float = 0.0
    treatment_intercept: float = -1.0
    treatment_coefs: Dict[str, float] = Field(default_factory=lambda: {"income": 1.0})
    unit_noise_sd: float = Field(0.2, ge=0)
    noise_family: Literal["poisson", "negbin"] = "poisson"
    noise_theta: float = Field(10.0, gt=0)

    # planted per-unit trends (log scale per year, or logit scale for spontaneity)
    crime_trend_fraction: float = Field(0.1, ge=0, le=1)
    crime_trend_slope: float = 0.15
    permit_trend_fraction: float = Field(0.1, ge=0, le=1)
    permit_trend_slope: float = 0.15
    spontaneity_trend_fraction: float = Field(0.1, ge=0, le=1)
    spontaneity_trend_slope: float = 0.3

    @field_validator("event_coefs", "spontaneity_coefs", "crime_coefs", "treatment_coefs")
    @classmethod
    def _known_covariates(cls, value: Dict[str, float]) -> Dict[str, float]:
        unknown = set(value) - set(SYNTH_COVARIATES)
        if unknown:
            raise ValueError(f"unknown covariates {sorted(unknown)}; allowed: {', '.join(SYNTH_COVARIATES)}")
        return value

    @model_validator(mode="after")
    def _check_years(self) -> "CityConfig":
        if self.last_year < self.first_year:
            raise ValueError("last_year must not precede first_year")
        return self

    @property
    def years(self) -> List[int]:
        return list(range(self.first_year, self.last_year + 1))


class InputPaths(BaseModel):
    model_config = ConfigDict(extra="forbid")

    permits: Optional[Path] = None
    crimes: Optional[Path] = None
    blockgroups: Optional[Path] = None
    acs: Optional[Path] = None
    landuse: Optional[Path] = None

    def is_empty(self) -> bool:
        return all(getattr(self, name) is None for name in type(self).model_fields)


class StudyWindows(BaseModel):
    model_config = ConfigDict(extra="forbid")

    permit_start: date = DEFAULT_PERMIT_WINDOW[0]
    permit_end: date = DEFAULT_PERMIT_WINDOW[1]
    crime_start: date = DEFAULT_CRIME_WINDOW[0]
    crime_end: date = DEFAULT_CRIME_WINDOW[1]

    @model_validator(mode="after")
    def _ordered(self) -> "StudyWindows":
        if self.permit_end < self.permit_start or self.crime_end < self.crime_start:
            raise ValueError("study window end precedes its start")
        return self

    @property
    def permit_window(self) -> Tuple[date, date]:
        return (self.permit_start, self.permit_end)

    @property
    def crime_window(self) -> Tuple[date, date]:
        return (self.crime_start, self.crime_end)

    @property
    def series_years(self) -> List[int]:
        """Complete years used for yearly series and trends (the crime window)."""
        return list(range(self.crime_start.year, self.crime_end.year + 1))


class AnalysisSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    alpha: float = Field(DEFAULT_ALPHA, gt=0, lt=1)
    regressions: Union[Literal["all"], List[str]] = "all"
    experiments: Union[Literal["all"], List[str]] = "all"


class MatchingSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    caliper: Optional[float] = Field(DEFAULT_CALIPER, gt=0)
    match_on: Literal["logit", "probability"] = DEFAULT_MATCH_ON  # type: ignore[assignment]
    many_to_one_ratio: float = Field(DEFAULT_MANY_TO_ONE_RATIO, gt=0)


class RunConfig(BaseModel):
    """Validated run configuration; flags are applied on top with with_overrides()."""
    model_config = ConfigDict(extra="forbid")

    schema_version: int = CONFIG_SCHEMA_VERSION
    seed: int = Field(0, ge=0, lt=2 ** 64)
    out_dir: Path = Path(DEFAULT_OUT_DIR)
    jobs: int = Field(DEFAULT_JOBS, ge=1)
    inputs: InputPaths = Field(default_factory=InputPaths)
    windows: StudyWindows = Field(default_factory=StudyWindows)
    event_types_path: Optional[Path] = None
    crime_types_path: Optional[Path] = None
    analysis: AnalysisSettings = Field(default_factory=AnalysisSettings)
    matching: MatchingSettings = Field(default_factory=MatchingSettings)
    synth: Optional[CityConfig] = None

    @field_validator("schema_version")
    @classmethod
    def _supported_schema(cls, value: int) -> int:
        if value != CONFIG_SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {value}; expected {CONFIG_SCHEMA_VERSION}")
        return value

    @property
    def uses_synthetic_inputs(self) -> bool:
        return self.synth is not None or self.inputs.is_empty()

    def check_inputs(self) -> None:
        """Raise MissingInputError for any unset or nonexistent input path."""
        for name in InputPaths.model_fields:
            path = getattr(self.inputs, name)
            if path is None:
                raise MissingInputError(f"Input '{name}' is not configured")
            if not Path(path).exists():
                raise MissingInputError(f"Input file not found: {path}")
        for path in (self.event_types_path, self.crime_types_path):
            if path is not None and not Path(path).exists():
                raise MissingInputError(f"Whitelist file not found: {path}")

    def with_overrides(self, **flags: Any) -> "RunConfig":
        """Return a copy with command-line flags applied; None values are ignored."""
        data = self.model_dump()
        if flags.get("out") is not None:
            data["out_dir"] = flags["out"]
        if flags.get("seed") is not None:
            data["seed"] = flags["seed"]
            if data.get("synth") is not None:
                data["synth"]["seed"] = flags["seed"]
        if flags.get("jobs") is not None:
            data["jobs"] = flags["jobs"]
        if flags.get("alpha") is not None:
            data["analysis"]["alpha"] = flags["alpha"]
        if flags.get("caliper") is not None:
            data["matching"]["caliper"] = flags["caliper"]
        return build_run_config(data)

    def city_config(self) -> CityConfig:
        """Synthetic city parameters, seeded from the run seed when no synth section is given."""
        if self.synth is not None:
            return self.synth
        return CityConfig(seed=self.seed)


def build_run_config(data: Mapping[str, Any]) -> RunConfig:
    """Validate a raw mapping into a RunConfig, converting pydantic errors."""
    try:
        return RunConfig.model_validate(dict(data))
    except ValidationError as e:
        raise ConfigurationError(f"Invalid configuration: {str(e)}")


def load_run_config(path: Optional[Union[str, Path]] = None) -> RunConfig:
    """
    Load a run configuration file.

    Args:
        path: YAML config file; None yields the defaults

    Returns:
        RunConfig: validated configuration
    """
    if path is None:
        return build_run_config({})
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"Config file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        raise ConfigurationError(f"Invalid YAML in config file {path}: {str(e)}")
    if not isinstance(data, dict):
        raise ConfigurationError(f"Config file {path} must contain a mapping")

    # relative input paths resolve against the config file's directory
    base = path.resolve().parent
    for key, value in (data.get("inputs") or {}).items():
        if value is not None and not Path(value).is_absolute():
            data["inputs"][key] = str(base / value)
    for key in ("event_types_path", "crime_types_path"):
        if data.get(key) and not Path(data[key]).is_absolute():
            data[key] = str(base / data[key])
    logger.debug(f"Loaded configuration from {path}")
    return build_run_config(data)
