"""Training loop: Adam + cosine-decayed learning rate, seed-deterministic."""

from __future__ import annotations

import math

import numpy as np
import torch

from .config import TrainConfig, lr_at
from .losses import charbonnier, combined_loss
from .model import Restorer


def train(model: Restorer, pairs: list[tuple[torch.Tensor, torch.Tensor]],
          cfg: TrainConfig) -> list[dict[str, float]]:
    """Optimize model on (degraded, reference) pairs; returns per-step log.

    Each log entry carries the learning rate, the combined loss actually
    optimized, and the Charbonnier component for progress tracking.  Batch
    order is drawn from a seeded generator so runs are reproducible.
    """
    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    steps_per_epoch = math.ceil(len(pairs) / cfg.batch)
    total_steps = cfg.epochs * steps_per_epoch
    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr_start,
                           betas=cfg.betas, eps=cfg.eps)
    curve: list[dict[str, float]] = []
    step = 0
    model.train()
    for _epoch in range(cfg.epochs):
        order = rng.permutation(len(pairs))
        for b in range(steps_per_epoch):
            idx = order[b * cfg.batch:(b + 1) * cfg.batch]
            x = torch.stack([pairs[i][0] for i in idx])
            y = torch.stack([pairs[i][1] for i in idx])
            lr = lr_at(step, total_steps, cfg.lr_start, cfg.lr_end)
            for group in opt.param_groups:
                group["lr"] = lr
            opt.zero_grad()
            pred = model(x)
            loss = combined_loss(pred, y, cfg.alpha1, cfg.alpha2, cfg.lam)
            loss.backward()
            if cfg.clip_norm is not None:
                torch.nn.utils.clip_grad_norm_(model.parameters(),
                                               cfg.clip_norm)
            opt.step()
            gamma = pred[0] if isinstance(pred, tuple) else pred
            with torch.no_grad():
                char = float(charbonnier(gamma, y))
            curve.append({"step": step, "lr": lr, "loss": loss.item(),
                          "charbonnier": char})
            step += 1
    model.eval()
    return curve
