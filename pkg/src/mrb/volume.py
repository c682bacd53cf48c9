"""Canonical 3D volume / k-space data model, normalization, file I/O and phantoms.

Axis convention: arrays are indexed (FE, PE, SL).  On disk the native format
is raw little-endian float32 with the FE index varying fastest (Fortran order
for this axis convention) plus a JSON sidecar.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DegenerateRange, FormatError, IoError, UnsupportedKind

__all__ = [
    "Volume",
    "KSpaceGrid",
    "normalize",
    "store_volume",
    "load_volume",
    "load_nifti",
    "make_phantom",
    "PHANTOM_KINDS",
]


@dataclass(frozen=True)
class Volume:
    """Real-valued intensity grid with (FE, PE, SL) dims and voxel spacing in mm."""

    data: np.ndarray
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    intensity_range: tuple[float, float] | None = None

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float32)
        if data.ndim != 3:
            raise ValueError(f"volume must be 3D, got shape {data.shape}")
        if min(data.shape) < 1:
            raise ValueError("all dims must be >= 1")
        if any(s <= 0 for s in self.spacing):
            raise ValueError("spacing components must be > 0")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape

    def min(self) -> float:
        return float(self.data.min())

    def max(self) -> float:
        return float(self.data.max())


@dataclass(frozen=True)
class KSpaceGrid:
    """Complex frequency grid paired to a Volume, zero-frequency at dc_index."""

    data: np.ndarray
    layout: str = "volumetric-3D"  # or "per-slice-2D"
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.complex128)
        if data.ndim != 3:
            raise ValueError(f"k-space grid must be 3D, got shape {data.shape}")
        if self.layout not in ("volumetric-3D", "per-slice-2D"):
            raise ValueError(f"unknown layout {self.layout!r}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape

    @property
    def dc_index(self) -> tuple[int, int, int]:
        # centered-spectrum convention: zero frequency at floor(n/2) per axis
        return tuple(n // 2 for n in self.data.shape)


def normalize(v: Volume) -> Volume:
    """Affine min-max rescale to [0, 1]; records the original bounds."""
    lo, hi = v.min(), v.max()
    if hi == lo:
        raise DegenerateRange(f"constant volume (value {lo}) cannot be normalized")
    data = (v.data.astype(np.float64) - lo) / (hi - lo)
    # force exact endpoints despite float rounding
    data = np.clip(data, 0.0, 1.0)
    return Volume(data.astype(np.float32), spacing=v.spacing, intensity_range=(lo, hi))


# ---------------------------------------------------------------------------
# Native f32raw + JSON sidecar format, NIfTI-1 import
# ---------------------------------------------------------------------------

def _sidecar_path(path: Path) -> Path:
    return path.with_suffix(".json")


def store_volume(v: Volume, path: str | Path) -> None:
    """Write `<name>.f32raw` + `<name>.json` sidecar (FE-fastest float32)."""
    path = Path(path)
    if path.suffix != ".f32raw":
        path = path.with_suffix(".f32raw")
    sidecar = {
        "dims": list(v.dims),
        "spacing_mm": list(v.spacing),
        "intensity_range": list(v.intensity_range) if v.intensity_range else [v.min(), v.max()],
        "kind": "real",
    }
    try:
        path.write_bytes(v.data.astype("<f4").tobytes(order="F"))
        _sidecar_path(path).write_text(json.dumps(sidecar, indent=1))
    except OSError as e:
        raise IoError(str(e)) from e


def store_kspace(k: KSpaceGrid, path: str | Path) -> None:
    """Write complex grid as interleaved (re, im) float32 with sidecar."""
    path = Path(path)
    if path.suffix != ".f32raw":
        path = path.with_suffix(".f32raw")
    flat = k.data.flatten(order="F")
    inter = np.empty(flat.size * 2, dtype="<f4")
    inter[0::2] = flat.real
    inter[1::2] = flat.imag
    sidecar = {
        "dims": list(k.dims),
        "spacing_mm": list(k.spacing),
        "intensity_range": [0.0, 0.0],
        "kind": "complex-interleaved",
    }
    try:
        path.write_bytes(inter.tobytes())
        _sidecar_path(path).write_text(json.dumps(sidecar, indent=1))
    except OSError as e:
        raise IoError(str(e)) from e


def load_volume(path: str | Path):
    """Load a native volume (or complex k-space grid) from `<name>.f32raw`."""
    path = Path(path)
    if path.suffix != ".f32raw":
        path = path.with_suffix(".f32raw")
    try:
        raw = path.read_bytes()
        sidecar = json.loads(_sidecar_path(path).read_text())
    except OSError as e:
        raise IoError(str(e)) from e
    except json.JSONDecodeError as e:
        raise FormatError(f"bad sidecar: {e}") from e
    for key in ("dims", "spacing_mm", "kind"):
        if key not in sidecar:
            raise FormatError(f"sidecar missing field {key!r}")
    dims = tuple(int(d) for d in sidecar["dims"])
    if len(dims) != 3 or min(dims) < 1:
        raise FormatError(f"bad dims {dims}")
    spacing = tuple(float(s) for s in sidecar["spacing_mm"])
    n = dims[0] * dims[1] * dims[2]
    kind = sidecar["kind"]
    if kind == "real":
        if len(raw) != n * 4:
            raise FormatError(f"payload is {len(raw)} bytes, dims imply {n * 4}")
        data = np.frombuffer(raw, dtype="<f4").reshape(dims, order="F")
        ir = sidecar.get("intensity_range")
        return Volume(data, spacing=spacing,
                      intensity_range=tuple(ir) if ir else None)
    elif kind == "complex-interleaved":
        if len(raw) != n * 8:
            raise FormatError(f"payload is {len(raw)} bytes, dims imply {n * 8}")
        inter = np.frombuffer(raw, dtype="<f4")
        data = (inter[0::2].astype(np.float64)
                + 1j * inter[1::2].astype(np.float64)).reshape(dims, order="F")
        return KSpaceGrid(data, spacing=spacing)
    raise FormatError(f"unknown sidecar kind {kind!r}")


_NIFTI_DTYPES = {16: np.dtype("<f4"), 4: np.dtype("<i2")}


def load_nifti(path: str | Path) -> Volume:
    """Import a single-file uncompressed NIfTI-1 volume (float32 or int16)."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise IoError(str(e)) from e
    if len(raw) < 348:
        raise FormatError("file shorter than a NIfTI-1 header")
    sizeof_hdr = struct.unpack("<i", raw[0:4])[0]
    if sizeof_hdr != 348:
        raise FormatError("not a NIfTI-1 file (sizeof_hdr != 348)")
    magic = raw[344:348]
    if magic not in (b"n+1\x00", b"ni1\x00"):
        raise FormatError(f"bad NIfTI magic {magic!r}")
    dim = struct.unpack("<8h", raw[40:56])
    if dim[0] < 3:
        raise FormatError(f"need a 3D image, got dim[0]={dim[0]}")
    dims = (dim[1], dim[2], dim[3])
    if min(dims) < 1:
        raise FormatError(f"bad dims {dims}")
    if dim[0] > 3 and any(d > 1 for d in dim[4 : 1 + dim[0]]):
        raise FormatError("4D+ images not supported")
    datatype = struct.unpack("<h", raw[70:72])[0]
    if datatype not in _NIFTI_DTYPES:
        raise FormatError(f"unsupported NIfTI datatype {datatype}")
    dtype = _NIFTI_DTYPES[datatype]
    pixdim = struct.unpack("<8f", raw[76:108])
    spacing = tuple(float(p) if p > 0 else 1.0 for p in pixdim[1:4])
    vox_offset = int(struct.unpack("<f", raw[108:112])[0])
    if magic == b"ni1\x00":
        raise FormatError("two-file NIfTI (.hdr/.img) not supported")
    n = dims[0] * dims[1] * dims[2]
    payload = raw[vox_offset : vox_offset + n * dtype.itemsize]
    if len(payload) != n * dtype.itemsize:
        raise FormatError("voxel payload shorter than header dims imply")
    data = np.frombuffer(payload, dtype=dtype).reshape(dims, order="F").astype(np.float32)
    return Volume(data, spacing=spacing)


# ---------------------------------------------------------------------------
# Phantoms: desk-scale stand-ins for real acquisitions
# ---------------------------------------------------------------------------

PHANTOM_KINDS = ("ellipsoid", "bandlimited", "noise")


def make_phantom(kind: str, dims: tuple[int, int, int], seed: int = 0,
                 cutoff: int | None = None) -> Volume:
    """Deterministic synthetic volume.

    Kinds:
      ellipsoid   -- nested-ellipsoid brain-like object, background exactly 0
      bandlimited -- random field whose centered spectrum is zero outside
                     |f| <= cutoff on every axis (default min(dims)//8)
      noise       -- uniform noise in [0, 1)
    """
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3 or min(dims) < 16:
        raise ValueError(f"dims must be >= (16,16,16), got {dims}")
    rng = np.random.default_rng(seed)
    if kind == "noise":
        return Volume(rng.random(dims, dtype=np.float64))
    if kind == "ellipsoid":
        return _ellipsoid_phantom(dims, rng)
    if kind == "bandlimited":
        if cutoff is None:
            cutoff = min(dims) // 8
        return _bandlimited_phantom(dims, rng, cutoff)
    raise UnsupportedKind(f"unknown phantom kind {kind!r}")


def _ellipsoid_phantom(dims, rng) -> Volume:
    grids = np.meshgrid(*[np.linspace(-1, 1, n) for n in dims], indexing="ij")
    out = np.zeros(dims, dtype=np.float64)
    # outer "skull" ellipsoid plus a few randomized interior structures
    shells = [((0.0, 0.0, 0.0), (0.75, 0.80, 0.70), 0.55)]
    for _ in range(6):
        center = rng.uniform(-0.35, 0.35, size=3)
        radii = rng.uniform(0.08, 0.30, size=3)
        value = rng.uniform(-0.35, 0.45)
        shells.append((tuple(center), tuple(radii), value))
    for center, radii, value in shells:
        r2 = sum(((g - c) / a) ** 2 for g, c, a in zip(grids, center, radii))
        out[r2 <= 1.0] += value
    outer = sum((g / a) ** 2 for g, a in zip(grids, (0.75, 0.80, 0.70)))
    out[outer > 1.0] = 0.0
    out = np.clip(out, 0.0, 1.0)
    return Volume(out)


def _bandlimited_phantom(dims, rng, cutoff: int) -> Volume:
    if cutoff < 1 or 2 * cutoff + 1 > min(dims):
        raise ValueError(f"cutoff {cutoff} incompatible with dims {dims}")
    spec = np.zeros(dims, dtype=np.complex128)
    dc = tuple(n // 2 for n in dims)
    sl = tuple(slice(c - cutoff, c + cutoff + 1) for c in dc)
    block = [2 * cutoff + 1] * 3
    coef = rng.normal(size=block) + 1j * rng.normal(size=block)
    # decay keeps the field smooth-looking; any support-limited pattern works
    f = np.arange(-cutoff, cutoff + 1)
    fr = np.sqrt(sum(g**2 for g in np.meshgrid(f, f, f, indexing="ij")))
    spec[sl] = coef * np.exp(-0.5 * (fr / max(cutoff, 1)) ** 2)
    # Hermitian symmetrization so the field is real before taking the real part
    img = np.fft.ifftn(np.fft.ifftshift(spec)).real
    lo, hi = img.min(), img.max()
    return Volume((img - lo) / (hi - lo))


def with_data(v: Volume, data: np.ndarray) -> Volume:
    """Volume with the same spacing but new data."""
    return replace(v, data=data, intensity_range=None)
