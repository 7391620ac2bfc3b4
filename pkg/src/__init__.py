"""
Neighborhood vibrancy - community vibrancy and crime analysis for census block groups.
"""
# Configuration
from .config import (
    CityConfig, RunConfig, DEFAULT_ALPHA, REGRESSION_COVARIATES, LAND_USE_CATEGORIES,
    load_run_config, load_event_types, load_crime_types,
)

# Ingest and spatial join
from .ingest import (
    PointEvent, BlockGroup, NeighborhoodProfile, AssignedEvent, EventKind,
    parse_permits, parse_crimes, parse_blockgroups, parse_profiles, assign_points, assign_events,
)

# Measures
from .measures import (
    EventCategory, CrimeCategory, MeasureTable, classify_event, classify_crime,
    build_measure_table, yearly_series, correlation_matrix,
)

# Models
from .glm import FitResult, ModelSpec, Family, fit_ols, fit_negbin, fit_logistic, predict
from .trends import TrendClass, TrendResult, fit_yearly_trend, classify_all
from .psm import (
    AboveMedian, SignificantTrend, MatchMode, MatchedExperiment, PairedInference,
    define_treatment, estimate_propensity, match_pairs, standardized_differences,
    paired_inference, matched_odds_ratio, run_experiment,
)

# Synthetic cities
from .synth import GroundTruth, SyntheticCity, draw_city, generate_city

# Orchestration
from .manager import PipelineManager

# Exceptions
from .exceptions import (
    VibrancyError, ConfigurationError, IngestError, ClassificationError, ModelError,
    TrendError, MatchingError, PipelineError,
)

__all__ = [
    # Configuration
    'CityConfig',
    'RunConfig',
    'DEFAULT_ALPHA',
    'REGRESSION_COVARIATES',
    'LAND_USE_CATEGORIES',
    'load_run_config',
    'load_event_types',
    'load_crime_types',

    # Ingest and spatial join
    'PointEvent',
    'BlockGroup',
    'NeighborhoodProfile',
    'AssignedEvent',
    'EventKind',
    'parse_permits',
    'parse_crimes',
    'parse_blockgroups',
    'parse_profiles',
    'assign_points',
    'assign_events',

    # Measures
    'EventCategory',
    'CrimeCategory',
    'MeasureTable',
    'classify_event',
    'classify_crime',
    'build_measure_table',
    'yearly_series',
    'correlation_matrix',

    # Models
    'FitResult',
    'ModelSpec',
    'Family',
    'fit_ols',
    'fit_negbin',
    'fit_logistic',
    'predict',
    'TrendClass',
    'TrendResult',
    'fit_yearly_trend',
    'classify_all',
    'AboveMedian',
    'SignificantTrend',
    'MatchMode',
    'MatchedExperiment',
    'PairedInference',
    'define_treatment',
    'estimate_propensity',
    'match_pairs',
    'standardized_differences',
    'paired_inference',
    'matched_odds_ratio',
    'run_experiment',

    # Synthetic cities
    'GroundTruth',
    'SyntheticCity',
    'draw_city',
    'generate_city',

    # Orchestration
    'PipelineManager',

    # Exceptions
    'VibrancyError',
    'ConfigurationError',
    'IngestError',
    'ClassificationError',
    'ModelError',
    'TrendError',
    'MatchingError',
    'PipelineError',
]
