"""Residual channel-attention restoration network with an evidential head.

Residual-in-residual topology: channel-attention blocks with local skips,
grouped under group-level skips, under one long trunk skip.  Input thin-slab
slices ride on the channel axis.  When the uncertainty head is enabled, a
separate branch off the shared trunk emits (v, alpha, beta) evidence maps
with positivity enforced by softplus (alpha = 1 + softplus).  The branch is
constructed after all restoration parameters so that, for a fixed seed, the
restoration path initializes identically with the head on or off.
"""

from __future__ import annotations

from pathlib import Path

import torch
from torch import nn
import torch.nn.functional as F

from .config import ModelConfig
from .errors import ConfigError

_EVIDENCE_FLOOR = 1e-6  # keeps v, beta > 0 and alpha > 1 in float32


def _conv(cin: int, cout: int) -> nn.Conv2d:
    return nn.Conv2d(cin, cout, 3, padding=1)


class ChannelAttention(nn.Module):
    def __init__(self, channels: int, reduction: int):
        super().__init__()
        self.gate = nn.Sequential(
            nn.AdaptiveAvgPool2d(1),
            nn.Conv2d(channels, max(channels // reduction, 1), 1),
            nn.ReLU(inplace=True),
            nn.Conv2d(max(channels // reduction, 1), channels, 1),
            nn.Sigmoid(),
        )

    def forward(self, x):
        return x * self.gate(x)


class RCAB(nn.Module):
    def __init__(self, channels: int, reduction: int):
        super().__init__()
        self.body = nn.Sequential(
            _conv(channels, channels), nn.ReLU(inplace=True),
            _conv(channels, channels), ChannelAttention(channels, reduction))

    def forward(self, x):
        return x + self.body(x)


class ResidualGroup(nn.Module):
    def __init__(self, channels: int, n_rcab: int, reduction: int):
        super().__init__()
        blocks = [RCAB(channels, reduction) for _ in range(n_rcab)]
        self.body = nn.Sequential(*blocks, _conv(channels, channels))

    def forward(self, x):
        return x + self.body(x)


class Restorer(nn.Module):
    """RCAN-style restorer; forward returns gamma or (gamma, v, alpha, beta)."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        f = cfg.n_filters
        self.head = _conv(cfg.in_slices, f)
        self.groups = nn.Sequential(
            *[ResidualGroup(f, cfg.n_rcab, cfg.reduction)
              for _ in range(cfg.n_rg)],
            _conv(f, f))
        ups = []
        for _ in range(cfg.stages):
            ups += [_conv(f, 4 * f), nn.PixelShuffle(2)]
        self.upsample = nn.Sequential(*ups)  # empty when scale[0] == 1
        self.tail = _conv(f, cfg.out_slices)
        self.evidence = (_conv(f, 3 * cfg.out_slices)
                         if cfg.uncertainty_head else None)

    def forward(self, x: torch.Tensor):
        if x.dim() != 4 or x.shape[1] != self.cfg.in_slices:
            raise ConfigError(
                f"expected (B, {self.cfg.in_slices}, H, W) input, got "
                f"{tuple(x.shape)}")
        feat = self.head(x)
        feat = self.upsample(feat + self.groups(feat))
        gamma = self.tail(feat)
        if self.cfg.scale == (1, 1) and x.shape[1] == gamma.shape[1]:
            gamma = gamma + x  # global residual: restore = input + correction
        if self.evidence is None:
            return gamma
        raw = self.evidence(feat)
        n = self.cfg.out_slices
        v = F.softplus(raw[:, :n]) + _EVIDENCE_FLOOR
        alpha = 1.0 + F.softplus(raw[:, n:2 * n]) + _EVIDENCE_FLOOR
        beta = F.softplus(raw[:, 2 * n:]) + _EVIDENCE_FLOOR
        return gamma, v, alpha, beta


def build_model(cfg: ModelConfig, seed: int | None = None) -> Restorer:
    if seed is not None:
        torch.manual_seed(seed)
    return Restorer(cfg)


def save_checkpoint(model: Restorer, path: str | Path) -> None:
    torch.save({"config": model.cfg.__dict__ | {"scale": list(model.cfg.scale)},
                "state": model.state_dict()}, path)


def load_checkpoint(path: str | Path) -> Restorer:
    ckpt = torch.load(path, map_location="cpu", weights_only=False)
    raw = dict(ckpt["config"])
    raw["scale"] = tuple(raw["scale"])
    model = Restorer(ModelConfig(**raw))
    model.load_state_dict(ckpt["state"])
    model.eval()
    return model
