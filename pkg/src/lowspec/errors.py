class LowspecError(Exception):
    """Base class for all package errors."""


class ParameterError(LowspecError, ValueError):
    """An argument is outside its documented domain."""


class ShapeError(LowspecError, ValueError):
    """Array or layer shapes do not compose."""


class TrainingError(LowspecError, RuntimeError):
    """Training diverged (non-finite loss) or was given no data."""


class FitError(LowspecError, ValueError):
    """An anomaly head cannot be fitted on the given data."""


class ConfigError(LowspecError, ValueError):
    """Experiment configuration is malformed; the message names the field."""


class ArtifactError(LowspecError, RuntimeError):
    """A stored artifact is missing, tampered with, or from another version."""
