"""Model and training configuration."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ConfigError

_STAGES = {1: 0, 2: 1, 4: 2}  # in-plane scale -> number of x2 upsampling stages


@dataclass(frozen=True)
class ModelConfig:
    """Residual channel-attention network geometry.

    The third dimension of each thin-slab patch rides on the channel axis:
    the network consumes ``in_slices`` channels and emits
    ``in_slices * scale[1]`` channels, upsampled in-plane by ``scale[0]``
    (one PixelShuffle stage per x2; none for artifact-reduction configs).
    """

    n_rg: int = 5
    n_rcab: int = 5
    n_filters: int = 64
    in_slices: int = 1
    scale: tuple[int, int] = (1, 1)
    uncertainty_head: bool = False
    reduction: int = 16

    def __post_init__(self):
        if self.in_slices not in (1, 3, 5):
            raise ConfigError(f"in_slices must be 1, 3 or 5, got {self.in_slices}")
        if self.scale[0] not in _STAGES:
            raise ConfigError(f"in-plane scale must be 1, 2 or 4, got {self.scale[0]}")
        if self.scale[1] < 1:
            raise ConfigError(f"slice scale must be >= 1, got {self.scale[1]}")
        if min(self.n_rg, self.n_rcab, self.n_filters) < 1:
            raise ConfigError("n_rg, n_rcab and n_filters must be positive")
        if not 1 <= self.reduction <= self.n_filters:
            raise ConfigError("reduction must be in [1, n_filters]")

    @property
    def stages(self) -> int:
        return _STAGES[self.scale[0]]

    @property
    def out_slices(self) -> int:
        return self.in_slices * self.scale[1]

    @classmethod
    def toy(cls, **overrides) -> "ModelConfig":
        """Small CI-friendly variant: 2 groups x 2 blocks, 16 filters."""
        base = dict(n_rg=2, n_rcab=2, n_filters=16, reduction=4)
        base.update(overrides)
        return cls(**base)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch: int = 8
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    lr_start: float = 1e-4
    lr_end: float = 1e-8
    alpha1: float = 0.5
    alpha2: float = 1.0
    lam: float = 0.01
    clip_norm: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch < 1:
            raise ConfigError("epochs and batch must be positive")
        if not 0 < self.lr_end <= self.lr_start:
            raise ConfigError("need 0 < lr_end <= lr_start")


def lr_at(step: int, total_steps: int, start: float, end: float) -> float:
    """Cosine decay from start (step 0) to end (final step), monotone."""
    if total_steps <= 1:
        return start
    t = step / (total_steps - 1)
    return end + 0.5 * (start - end) * (1.0 + math.cos(math.pi * t))
