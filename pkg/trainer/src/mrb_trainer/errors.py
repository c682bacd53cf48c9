"""Trainer exception hierarchy."""


class TrainerError(Exception):
    """Base class for trainer failures."""


class ConfigError(TrainerError):
    """Model or training configuration is invalid."""


class DataMismatch(TrainerError):
    """Patch data does not match the model configuration."""


class ShapeMismatch(TrainerError):
    """Inference input incompatible with the trained model."""


class GradMismatch(TrainerError):
    """Analytic gradient disagrees with finite differences."""
