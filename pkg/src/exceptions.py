"""
Custom exceptions for the neighborhood vibrancy analysis toolkit.
"""
from typing import Optional, Sequence


class VibrancyError(Exception):
    """Base exception for all application errors."""
    pass


class ConfigurationError(VibrancyError):
    """Exception raised for configuration errors."""
    pass


class IngestError(VibrancyError):
    """Base exception for input parsing errors."""
    pass


class SchemaError(IngestError):
    """Exception raised when a file is missing required columns."""
    pass


class RowError(IngestError):
    """Exception raised for a malformed row; carries the file path and line number."""

    def __init__(self, message: str, path: str = "", line: int = 0):
        self.path = path
        self.line = line
        location = f", line {line}" if line else ""
        super().__init__(f"{message}{location}")


class GeometryError(IngestError):
    """Base exception for block-group geometry errors."""
    pass


class UnclosedRingError(GeometryError):
    """Exception raised when a polygon ring is not closed or too short."""
    pass


class DuplicateIdError(GeometryError):
    """Exception raised when two block groups share an id."""
    pass


class ProfileValidationError(IngestError):
    """Exception raised when a neighborhood profile violates its invariants."""
    pass


class UnknownLandUseError(ProfileValidationError):
    """Exception raised for a land-use category outside the allowed set."""
    pass


class ClassificationError(VibrancyError):
    """Base exception for event and crime type classification."""
    pass


class UnknownEventTypeError(ClassificationError):
    """Exception raised for a permit event type outside the whitelist."""
    pass


class UnknownCrimeTypeError(ClassificationError):
    """Exception raised for a crime type outside the whitelist."""
    pass


class ModelError(VibrancyError):
    """Base exception for regression model errors."""
    pass


class DesignError(ModelError):
    """Exception raised when a design matrix cannot be built."""
    pass


class ZeroVarianceError(DesignError):
    """Exception raised when a predictor is constant after row filtering."""

    def __init__(self, column: str):
        self.column = column
        super().__init__(f"Predictor '{column}' has zero variance after filtering")


class RankDeficientError(ModelError):
    """Exception raised for a rank-deficient design matrix."""

    def __init__(self, dependent: Sequence[str]):
        self.dependent = list(dependent)
        super().__init__(f"Design matrix is rank deficient; dependent columns: {', '.join(self.dependent)}")


class ConvergenceError(ModelError):
    """Exception raised when an iterative fit fails to converge."""

    def __init__(self, message: str, last_iterate: Optional[Sequence[float]] = None, iterations: int = 0):
        self.last_iterate = None if last_iterate is None else list(last_iterate)
        self.iterations = iterations
        super().__init__(message)


class ColumnMismatchError(ModelError):
    """Exception raised when a prediction matrix does not match the fitted columns."""
    pass


class TrendError(VibrancyError):
    """Exception raised when a yearly trend cannot be fitted."""
    pass


class MatchingError(VibrancyError):
    """Base exception for propensity score matching errors."""
    pass


class NoContrastError(MatchingError):
    """Exception raised when a treatment rule yields no treated or no control units."""
    pass


class InsufficientPairsError(MatchingError):
    """Exception raised when too few matched pairs exist for inference."""
    pass


class PipelineError(VibrancyError):
    """Base exception for command orchestration errors."""
    pass


class MissingInputError(PipelineError):
    """Exception raised when a configured input file does not exist."""
    pass


class MissingArtifactError(PipelineError):
    """Exception raised when an upstream artifact has not been produced yet."""

    def __init__(self, path: str, command: str):
        self.path = path
        self.command = command
        super().__init__(f"Required artifact {path} not found; run the '{command}' command first")
