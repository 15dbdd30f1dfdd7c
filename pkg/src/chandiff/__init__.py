"""Conditional diffusion models for wireless channel generation, plus an
end-to-end autoencoder trained through them."""

__version__ = "0.1.0"

from . import channels, checkpoint, diffusion, e2e, metrics, nn
from .errors import CheckpointError, ConfigError, TrainingDiverged

__all__ = [
    "CheckpointError",
    "ConfigError",
    "TrainingDiverged",
    "channels",
    "checkpoint",
    "diffusion",
    "e2e",
    "metrics",
    "nn",
]
