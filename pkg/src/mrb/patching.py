"""Overlapping patch cropping, thin-slab windows, reassembly and self-ensemble."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CoverageGap, MissingSlice, VolumeTooSmall
from .volume import Volume

__all__ = [
    "PatchSpec",
    "PatchSet",
    "crop",
    "assemble",
    "self_ensemble",
    "save_patchset",
    "load_patchset",
]


@dataclass(frozen=True)
class PatchSpec:
    """In-plane patch geometry plus thin-slab slice windowing.

    scale is the LR->HR correspondence (s_in_plane, s_SL); it does not
    change cropping of the volume the spec is applied to.
    """

    in_plane_size: int = 64
    in_plane_overlap: int = 16
    slices_per_patch: int = 1
    slice_overlap: int | None = None  # defaults to slices_per_patch - 1
    scale: tuple[int, int] = (1, 1)

    def __post_init__(self):
        if self.slice_overlap is None:
            object.__setattr__(self, "slice_overlap", self.slices_per_patch - 1)
        if not (0 <= self.in_plane_overlap < self.in_plane_size):
            raise ValueError("in_plane_overlap must be < in_plane_size")
        if not (0 <= self.slice_overlap < self.slices_per_patch):
            raise ValueError("slice_overlap must be < slices_per_patch")

    def to_json(self) -> dict:
        return {
            "in_plane_size": self.in_plane_size,
            "in_plane_overlap": self.in_plane_overlap,
            "slices_per_patch": self.slices_per_patch,
            "slice_overlap": self.slice_overlap,
            "scale": list(self.scale),
        }

    @classmethod
    def from_json(cls, d: dict) -> "PatchSpec":
        return cls(d["in_plane_size"], d["in_plane_overlap"],
                   d["slices_per_patch"], d.get("slice_overlap"),
                   tuple(d.get("scale", (1, 1))))


@dataclass(frozen=True)
class PatchSet:
    patches: tuple[tuple[np.ndarray, tuple[int, int, int]], ...]
    source_dims: tuple[int, int, int]
    spec: PatchSpec


def _origins(extent: int, size: int, stride: int) -> list[int]:
    """Regular stride positions with the last origin clamped flush to the edge."""
    out = list(range(0, extent - size + 1, stride))
    if out[-1] + size < extent:
        out.append(extent - size)
    return out


def crop(v: Volume, spec: PatchSpec) -> PatchSet:
    """Regular overlapping grid of (size, size, n_slices) patches covering v."""
    n_fe, n_pe, n_sl = v.dims
    size, n = spec.in_plane_size, spec.slices_per_patch
    if n_fe < size or n_pe < size or n_sl < n:
        raise VolumeTooSmall(
            f"volume {v.dims} smaller than one patch ({size},{size},{n})")
    stride = size - spec.in_plane_overlap
    sl_stride = n - spec.slice_overlap
    patches = []
    for i in _origins(n_fe, size, stride):
        for j in _origins(n_pe, size, stride):
            for s in _origins(n_sl, n, sl_stride):
                sub = v.data[i:i + size, j:j + size, s:s + n]
                patches.append((sub, (i, j, s)))
    return PatchSet(tuple(patches), v.dims, spec)


def assemble(ps: PatchSet) -> Volume:
    """Per-voxel average over all covering patches; exact identity after crop."""
    acc = np.zeros(ps.source_dims, dtype=np.float64)
    count = np.zeros(ps.source_dims, dtype=np.float64)
    for data, (i, j, s) in ps.patches:
        di, dj, ds = data.shape
        acc[i:i + di, j:j + dj, s:s + ds] += data.astype(np.float64)
        count[i:i + di, j:j + dj, s:s + ds] += 1.0
    if (count == 0).any():
        raise CoverageGap("patch set leaves uncovered voxels")
    return Volume(acc / count)


def self_ensemble(outputs: list[dict[int, np.ndarray]]) -> Volume:
    """Average the per-slice predictions made by overlapping thin-slab windows.

    outputs: one mapping slice_index -> 2D image per window; every slice
    index present anywhere must get at least one prediction.
    """
    if not outputs:
        raise MissingSlice("no window outputs given")
    indices = sorted({i for o in outputs for i in o})
    if indices != list(range(indices[0], indices[-1] + 1)) or indices[0] != 0:
        raise MissingSlice(f"slice indices {indices} are not contiguous from 0")
    first = next(iter(outputs[0].values()))
    acc = np.zeros(first.shape + (len(indices),), dtype=np.float64)
    count = np.zeros(len(indices), dtype=np.float64)
    for window in outputs:
        for idx, img in window.items():
            acc[:, :, idx] += np.asarray(img, dtype=np.float64)
            count[idx] += 1.0
    if (count == 0).any():
        raise MissingSlice("some slice index has no prediction")
    return Volume(acc / count[None, None, :])


# ---------------------------------------------------------------------------
# On-disk patch sets: one f32raw per patch + a JSON manifest
# ---------------------------------------------------------------------------

def save_patchset(ps: PatchSet, out_dir: str | Path, name: str = "patch") -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    origins = []
    for idx, (data, origin) in enumerate(ps.patches):
        fname = f"{name}_{idx:05d}.f32raw"
        (out_dir / fname).write_bytes(
            np.ascontiguousarray(data, dtype="<f4").tobytes(order="F"))
        origins.append({"file": fname, "origin": list(origin),
                        "shape": list(data.shape)})
    manifest = {
        "spec": ps.spec.to_json(),
        "source_dims": list(ps.source_dims),
        "origins": origins,
    }
    mpath = out_dir / "manifest.json"
    mpath.write_text(json.dumps(manifest, indent=1))
    return mpath


def load_patchset(manifest_path: str | Path) -> PatchSet:
    manifest_path = Path(manifest_path)
    manifest = json.loads(manifest_path.read_text())
    spec = PatchSpec.from_json(manifest["spec"])
    patches = []
    for entry in manifest["origins"]:
        shape = tuple(entry["shape"])
        raw = (manifest_path.parent / entry["file"]).read_bytes()
        data = np.frombuffer(raw, dtype="<f4").reshape(shape, order="F")
        patches.append((data, tuple(entry["origin"])))
    return PatchSet(tuple(patches), tuple(manifest["source_dims"]), spec)
