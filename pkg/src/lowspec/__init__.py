"""Low-feature spectrogram classification: synthetic tone corpora, spectrograms,
numpy networks, one-class heads, siamese verification and evaluation."""

from .errors import (
    ArtifactError,
    ConfigError,
    FitError,
    LowspecError,
    ParameterError,
    ShapeError,
    TrainingError,
)

__version__ = "0.1.0"

__all__ = [
    "ArtifactError", "ConfigError", "FitError", "LowspecError", "ParameterError", "ShapeError",
    "TrainingError", "__version__",
]
