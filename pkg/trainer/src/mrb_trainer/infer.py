"""Window-by-window inference re-using the mrb patcher for re-assembly.

The input volume is cropped with the primary patcher; each thin-slab window
is restored independently, windows sharing a slab origin are re-assembled
in-plane with the primary `assemble`, and the overlapping slab predictions
for each output slice are averaged with the primary `self_ensemble`.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import numpy as np
import torch

from mrb.calibration import NIGMaps, mean_epistemic_per_slice, nig_moments
from mrb.patching import PatchSet, PatchSpec, assemble, crop, self_ensemble
from mrb.volume import Volume

from .errors import ShapeMismatch
from .model import Restorer


def _ensemble(by_slab: dict[int, list], out_inplane: tuple[int, int],
              out_slices: int, s_sl: int) -> Volume:
    """In-plane assembly per slab origin, then slice-wise self-ensemble."""
    windows = []
    for origin_sl, patches in by_slab.items():
        slab = assemble(PatchSet(tuple(patches),
                                 out_inplane + (out_slices,),
                                 PatchSpec(1, 0, 1)))
        windows.append({origin_sl * s_sl + j: slab.data[:, :, j]
                        for j in range(out_slices)})
    return self_ensemble(windows)


def infer(model: Restorer, v: Volume, spec: PatchSpec
          ) -> tuple[Volume, NIGMaps | None]:
    """Restore a volume; also returns ensembled NIG maps when the head is on."""
    cfg = model.cfg
    if spec.slices_per_patch != cfg.in_slices:
        raise ShapeMismatch(
            f"patch spec has {spec.slices_per_patch} slices per window, "
            f"model consumes {cfg.in_slices}")
    if tuple(spec.scale) != tuple(cfg.scale):
        raise ShapeMismatch(
            f"patch spec scale {spec.scale} != model scale {cfg.scale}")
    s_ip, s_sl = cfg.scale
    ps = crop(v, spec)
    by_slab: dict[str, dict[int, list]] = {
        k: defaultdict(list) for k in ("gamma", "v", "alpha", "beta")}
    model.eval()
    with torch.no_grad():
        for data, (i, j, s) in ps.patches:
            x = torch.from_numpy(np.ascontiguousarray(
                np.transpose(data, (2, 0, 1)).astype(np.float32)))[None]
            pred = model(x)
            maps = pred if isinstance(pred, tuple) else (pred,)
            for key, m in zip(("gamma", "v", "alpha", "beta"), maps):
                patch = np.transpose(m[0].numpy(), (1, 2, 0))
                by_slab[key][s].append((patch, (i * s_ip, j * s_ip, 0)))
    n_fe, n_pe, _ = v.dims
    out_inplane = (n_fe * s_ip, n_pe * s_ip)
    restored = _ensemble(by_slab["gamma"], out_inplane, cfg.out_slices, s_sl)
    if not cfg.uncertainty_head:
        return restored, None
    parts = {k: _ensemble(by_slab[k], out_inplane, cfg.out_slices, s_sl).data
             for k in ("v", "alpha", "beta")}
    nig = NIGMaps(restored.data, parts["v"], parts["alpha"], parts["beta"])
    return restored, nig


def write_epistemic_csv(volume_id: str, maps: NIGMaps, path: str | Path,
                        append: bool = False) -> None:
    """Per-slice mean epistemic uncertainty in the calibration CSV schema.

    With append=True the header is skipped so several volumes can share one
    CSV keyed by (volume_id, slice).
    """
    _pred, _alea, epistemic = nig_moments(maps)
    with open(path, "a" if append else "w", newline="") as f:
        w = csv.writer(f)
        if not append:
            w.writerow(["volume_id", "slice", "mean_epistemic"])
        for sl, val in mean_epistemic_per_slice(epistemic):
            w.writerow([volume_id, sl, val])
