"""Exception hierarchy shared across the package."""


class WorkshapError(Exception):
    """Base class for all package errors."""


class SchemaError(WorkshapError):
    """A schema is malformed or an input does not match it."""


class DataValidationError(WorkshapError):
    """A data row violates a schema or sample invariant."""

    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class SplitError(WorkshapError):
    """A split or fold assignment cannot satisfy its stratification."""


class SampleSizeError(WorkshapError):
    """Requested more samples than are available."""


class TrainingError(WorkshapError):
    """Model training cannot proceed on the given data."""


class PredictionError(WorkshapError):
    """A feature vector cannot be routed through the model."""


class OracleLimitError(WorkshapError):
    """The exponential-time oracle refuses inputs beyond its feature cap."""


class ComparisonError(WorkshapError):
    """Curves cannot be compared (no shared cohort values)."""


class GenerationError(WorkshapError):
    """The synthetic generator cannot meet its configuration."""


class PipelineError(WorkshapError):
    """A pipeline stage failed or an upstream artifact is missing."""

    def __init__(self, message, stage=None):
        super().__init__(message)
        self.stage = stage
