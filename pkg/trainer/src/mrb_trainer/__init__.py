"""Thin-slab restoration model with evidential uncertainty, on mrb patch sets."""

from .config import ModelConfig, TrainConfig, lr_at
from .data import load_pairs
from .errors import (ConfigError, DataMismatch, GradMismatch, ShapeMismatch,
                     TrainerError)
from .infer import infer, write_epistemic_csv
from .losses import (GradReport, charbonnier, combined_loss, gradcheck,
                     nig_loss, ssim_loss)
from .model import Restorer, build_model, load_checkpoint, save_checkpoint
from .train import train

__version__ = "0.1.0"

__all__ = [
    "ModelConfig", "TrainConfig", "lr_at", "load_pairs",
    "TrainerError", "ConfigError", "DataMismatch", "GradMismatch",
    "ShapeMismatch", "infer", "write_epistemic_csv", "GradReport",
    "charbonnier", "combined_loss", "gradcheck", "nig_loss", "ssim_loss",
    "Restorer", "build_model", "load_checkpoint", "save_checkpoint", "train",
]
