"""Centered unitary Fourier transforms and k-space truncation downsampling.

Convention: k-space grids are centered (zero frequency at floor(n/2) per
axis) and the transforms are unitary, so Parseval holds without extra
scaling.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import IndivisibleDims
from .volume import KSpaceGrid, Volume, normalize

__all__ = [
    "DownsampleStrategy",
    "fft3",
    "ifft3",
    "fft2_slices",
    "ifft2_slices",
    "truncate",
    "downsample",
    "acceleration_factor",
    "retention_ratio",
    "strategy_catalog",
    "parse_strategy",
]


@dataclass(frozen=True)
class DownsampleStrategy:
    """Per-axis integer scale factors (FE, PE, SL) for k-space truncation."""

    scale: tuple[int, int, int]
    zero_fill: bool = False

    def __post_init__(self):
        if len(self.scale) != 3 or any(int(s) != s or s < 1 for s in self.scale):
            raise ValueError(f"scale must be three positive integers, got {self.scale}")
        object.__setattr__(self, "scale", tuple(int(s) for s in self.scale))

    def to_json(self) -> dict:
        return {"scale": list(self.scale), "zero_fill": self.zero_fill}

    @classmethod
    def from_json(cls, d: dict) -> "DownsampleStrategy":
        return cls(tuple(d["scale"]), bool(d.get("zero_fill", False)))


def parse_strategy(text: str, zero_fill: bool = False) -> DownsampleStrategy:
    """Parse a 'FExPExSL' string such as '2x2x1'."""
    parts = text.lower().split("x")
    if len(parts) != 3:
        raise ValueError(f"strategy must look like '2x2x1', got {text!r}")
    try:
        scale = tuple(int(p) for p in parts)
    except ValueError as e:
        raise ValueError(f"strategy must look like '2x2x1', got {text!r}") from e
    return DownsampleStrategy(scale, zero_fill)


def acceleration_factor(strategy: DownsampleStrategy) -> Fraction:
    """Acquisition-time speedup: only PE and SL steps cost scan time."""
    return Fraction(strategy.scale[1] * strategy.scale[2])


def retention_ratio(strategy: DownsampleStrategy) -> Fraction:
    """Fraction of k-space samples kept after truncation."""
    s = strategy.scale
    return Fraction(1, s[0] * s[1] * s[2])


def strategy_catalog() -> list[tuple[DownsampleStrategy, int]]:
    """The six studied strategies, grouped by acceleration factor."""
    scales = [(2, 2, 1), (1, 1, 2), (1, 1, 3), (4, 4, 1), (2, 2, 2), (1, 1, 4)]
    out = []
    for sc in scales:
        s = DownsampleStrategy(sc)
        out.append((s, int(acceleration_factor(s))))
    return out


# ---------------------------------------------------------------------------
# Transforms
# ---------------------------------------------------------------------------

def fft3(v: Volume) -> KSpaceGrid:
    """Centered unitary 3D FFT of a volume."""
    if min(v.dims) < 2:
        raise ValueError(f"dims must be >= (2,2,2), got {v.dims}")
    k = np.fft.fftshift(np.fft.fftn(np.fft.ifftshift(v.data.astype(np.float64)),
                                    norm="ortho"))
    return KSpaceGrid(k, layout="volumetric-3D", spacing=v.spacing)


def ifft3(k: KSpaceGrid) -> np.ndarray:
    """Centered unitary inverse 3D FFT; returns the complex image array."""
    return np.fft.fftshift(np.fft.ifftn(np.fft.ifftshift(k.data), norm="ortho"))


def fft2_slices(data: np.ndarray) -> np.ndarray:
    """Centered unitary 2D FFT of each (FE, PE) slice of a 3D array."""
    return np.fft.fftshift(
        np.fft.fft2(np.fft.ifftshift(data, axes=(0, 1)), axes=(0, 1), norm="ortho"),
        axes=(0, 1))


def ifft2_slices(k: np.ndarray) -> np.ndarray:
    """Inverse of fft2_slices."""
    return np.fft.fftshift(
        np.fft.ifft2(np.fft.ifftshift(k, axes=(0, 1)), axes=(0, 1), norm="ortho"),
        axes=(0, 1))


# ---------------------------------------------------------------------------
# Truncation and downsampling
# ---------------------------------------------------------------------------

def _window(n: int, m: int) -> slice:
    # centered block of size m around dc = n//2: [dc - m//2, dc - m//2 + m)
    dc = n // 2
    start = dc - m // 2
    return slice(start, start + m)


def truncate(k: KSpaceGrid, strategy: DownsampleStrategy) -> KSpaceGrid:
    """Keep the central block of size dims/scale per axis; crop or zero-fill."""
    dims = k.dims
    scale = strategy.scale
    if any(n % s != 0 for n, s in zip(dims, scale)):
        raise IndivisibleDims(f"scale {scale} does not divide dims {dims}")
    windows = tuple(_window(n, n // s) for n, s in zip(dims, scale))
    if strategy.zero_fill:
        out = np.zeros(dims, dtype=np.complex128)
        out[windows] = k.data[windows]
    else:
        out = k.data[windows]
    spacing = k.spacing if strategy.zero_fill else tuple(
        sp * s for sp, s in zip(k.spacing, scale))
    return KSpaceGrid(out, layout=k.layout, spacing=spacing)


def _zero_unpaired_boundary(data: np.ndarray, orig_dims, scale,
                            zero_fill: bool) -> np.ndarray:
    """Zero the conjugate-unpaired Nyquist boundary plane of even windows.

    An even retained size m < n keeps frequency -m/2 but not its mirror
    +m/2, so a real input no longer maps to an exactly real output and
    truncation stops being a projection.  Zeroing that single plane per
    axis restores both properties without touching the window interior.
    """
    out = np.array(data, copy=True)
    for ax, (n, s) in enumerate(zip(orig_dims, scale)):
        m = n // s
        if m % 2 != 0 or m == n:
            continue
        idx = (n // 2 - m // 2) if zero_fill else 0
        sl = [slice(None)] * out.ndim
        sl[ax] = idx
        out[tuple(sl)] = 0.0
    return out


def downsample(v: Volume, strategy: DownsampleStrategy,
               max_imag_ratio: float | None = None) -> Volume:
    """k-space truncation downsampling: FFT, central crop, iFFT, renormalize.

    Even-size windows break Hermitian symmetry at the Nyquist boundary
    plane; that unpaired plane is zeroed (see _zero_unpaired_boundary) so
    the output is real up to FFT noise and re-applying the same zero-fill
    strategy is a no-op.  Pass max_imag_ratio to assert a bound on the
    residual imaginary part (e.g. 1e-3).
    """
    k = truncate(fft3(v), strategy)
    k = KSpaceGrid(_zero_unpaired_boundary(k.data, v.dims, strategy.scale,
                                           strategy.zero_fill),
                   layout=k.layout, spacing=k.spacing)
    img = ifft3(k)
    if max_imag_ratio is not None:
        imag = np.abs(img.imag).max()
        peak = np.abs(v.data).max()
        if peak > 0 and imag > max_imag_ratio * peak:
            raise ValueError(
                f"imaginary residue {imag:.3e} exceeds {max_imag_ratio:.1e} * max|v|")
    return normalize(Volume(img.real, spacing=k.spacing))
