"""Paired patch loading from patch-set manifests written by the mrb patcher."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch

from mrb.patching import load_patchset

from .config import ModelConfig
from .errors import DataMismatch


def _to_tensor(patch: np.ndarray) -> torch.Tensor:
    """(H, W, S) patch -> (S, H, W) channels-first float32 tensor."""
    return torch.from_numpy(np.ascontiguousarray(
        np.transpose(patch, (2, 0, 1)).astype(np.float32)))


def load_pairs(lo_manifest: str | Path, hi_manifest: str | Path,
               cfg: ModelConfig) -> list[tuple[torch.Tensor, torch.Tensor]]:
    """Zip degraded/reference patch sets into training pairs for cfg.

    Both manifests must enumerate the same number of patches in the same
    order; shapes must match the model's slice counts and in-plane scale.
    """
    lo = load_patchset(lo_manifest)
    hi = load_patchset(hi_manifest)
    if len(lo.patches) != len(hi.patches):
        raise DataMismatch(
            f"{len(lo.patches)} degraded vs {len(hi.patches)} reference patches")
    s_ip, _s_sl = cfg.scale
    pairs = []
    for (lo_data, _o1), (hi_data, _o2) in zip(lo.patches, hi.patches):
        if lo_data.shape[2] != cfg.in_slices:
            raise DataMismatch(
                f"degraded patch has {lo_data.shape[2]} slices, model wants "
                f"{cfg.in_slices}")
        want = (lo_data.shape[0] * s_ip, lo_data.shape[1] * s_ip,
                cfg.out_slices)
        if hi_data.shape != want:
            raise DataMismatch(
                f"reference patch shape {hi_data.shape} != expected {want}")
        pairs.append((_to_tensor(lo_data), _to_tensor(hi_data)))
    return pairs
