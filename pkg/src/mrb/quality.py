"""Image-quality metrics (MSE, PSNR, SSIM, SSIM map) and training-loss oracles.

The loss functions here are the numerical reference used both for
evaluation reports and for cross-checking the trainer's differentiable
implementations.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import gammaln

from .errors import DomainError, WindowTooLarge
from .volume import Volume

__all__ = [
    "C1",
    "C2",
    "QualityReport",
    "LossBreakdown",
    "mse",
    "psnr",
    "ssim_global",
    "ssim_map",
    "charbonnier",
    "ssim_loss",
    "nig_loss",
    "nig_nll_grad_gamma",
    "combined_loss",
    "evaluate_volume",
    "write_batch_csv",
]

# SSIM stabilizers for intensities normalized to L = 1
C1 = (0.01 * 1.0) ** 2
C2 = (0.03 * 1.0) ** 2


def _arr(x) -> np.ndarray:
    return np.asarray(x.data if isinstance(x, Volume) else x, dtype=np.float64)


def mse(x, y) -> float:
    x, y = _arr(x), _arr(y)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {y.shape}")
    return float(np.mean((x - y) ** 2))


def psnr(x, y) -> float:
    """10*log10(max(y)^2 / MSE); +inf sentinel for identical images."""
    m = mse(x, y)
    peak = float(_arr(y).max())
    if m == 0.0:
        return math.inf
    if peak == 0.0:
        return -math.inf
    return 10.0 * math.log10(peak * peak / m)


def ssim_global(x, y) -> float:
    """SSIM from whole-image statistics (single-window form)."""
    x, y = _arr(x), _arr(y)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {y.shape}")
    mu_x, mu_y = x.mean(), y.mean()
    var_x, var_y = x.var(), y.var()
    cov = ((x - mu_x) * (y - mu_y)).mean()
    return float((2 * mu_x * mu_y + C1) * (2 * cov + C2)
                 / ((mu_x**2 + mu_y**2 + C1) * (var_x + var_y + C2)))


def _box_sum_2d(a: np.ndarray, half: int) -> np.ndarray:
    """Sum over the (2*half+1)^2 window centered at each pixel, edge-clipped."""
    h, w = a.shape
    pad = np.zeros((h + 1, w + 1), dtype=np.float64)
    pad[1:, 1:] = np.cumsum(np.cumsum(a, axis=0), axis=1)
    r0 = np.clip(np.arange(h) - half, 0, h)
    r1 = np.clip(np.arange(h) + half + 1, 0, h)
    c0 = np.clip(np.arange(w) - half, 0, w)
    c1 = np.clip(np.arange(w) + half + 1, 0, w)
    return (pad[np.ix_(r1, c1)] - pad[np.ix_(r0, c1)]
            - pad[np.ix_(r1, c0)] + pad[np.ix_(r0, c0)])


def _ssim_map_slice(x: np.ndarray, y: np.ndarray, window: int) -> np.ndarray:
    half = window // 2
    ones = np.ones_like(x)
    n = _box_sum_2d(ones, half)
    mu_x = _box_sum_2d(x, half) / n
    mu_y = _box_sum_2d(y, half) / n
    var_x = _box_sum_2d(x * x, half) / n - mu_x**2
    var_y = _box_sum_2d(y * y, half) / n - mu_y**2
    cov = _box_sum_2d(x * y, half) / n - mu_x * mu_y
    var_x = np.maximum(var_x, 0.0)
    var_y = np.maximum(var_y, 0.0)
    return ((2 * mu_x * mu_y + C1) * (2 * cov + C2)
            / ((mu_x**2 + mu_y**2 + C1) * (var_x + var_y + C2)))


def ssim_map(x, y, window: int = 11):
    """Per-voxel windowed SSIM map (uniform in-plane window, edge-clipped).

    Returns (map, mean).  3D inputs are processed slice by slice along SL.
    """
    x, y = _arr(x), _arr(y)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {y.shape}")
    if window % 2 == 0 or window < 3:
        raise ValueError("window must be odd and >= 3")
    squeeze = x.ndim == 2
    if squeeze:
        x, y = x[:, :, None], y[:, :, None]
    if window > min(x.shape[0], x.shape[1]):
        raise WindowTooLarge(f"window {window} exceeds in-plane dims {x.shape[:2]}")
    out = np.empty_like(x)
    for s in range(x.shape[2]):
        out[:, :, s] = _ssim_map_slice(x[:, :, s], y[:, :, s], window)
    if squeeze:
        out = out[:, :, 0]
    return out, float(out.mean())


def charbonnier(x, y, eps: float = 1e-4) -> float:
    """Differentiable L1: mean sqrt((x - y)^2 + eps)."""
    if eps <= 0:
        raise ValueError("eps must be > 0")
    x, y = _arr(x), _arr(y)
    return float(np.mean(np.sqrt((x - y) ** 2 + eps)))


def ssim_loss(x, y, window: int | None = None) -> float:
    """Mean over slices of |1 - SSIM^2|; 2D inputs are a single sample.

    With window=None each slice uses the whole-slice (global) SSIM,
    otherwise the mean of the windowed map.
    """
    x, y = _arr(x), _arr(y)
    if x.ndim == 2:
        x, y = x[:, :, None], y[:, :, None]
    vals = []
    for s in range(x.shape[2]):
        if window is None:
            v = ssim_global(x[:, :, s], y[:, :, s])
        else:
            v = ssim_map(x[:, :, s], y[:, :, s], window)[1]
        vals.append(abs(1.0 - v * v))
    return float(np.mean(vals))


def _check_nig(v, alpha, beta):
    if np.any(v <= 0) or np.any(alpha <= 1) or np.any(beta <= 0):
        raise DomainError("NIG parameters require v > 0, alpha > 1, beta > 0")


def nig_loss(y, gamma, v, alpha, beta, lam: float = 0.01) -> tuple[float, float]:
    """Normal-Inverse-Gamma negative log-likelihood and evidence regularizer.

    Returns (nll, reg), each averaged over voxels:
      nll = 0.5*log(pi/v) - a*log(O) + (a + 0.5)*log((y-g)^2 v + O)
            + log Gamma(a) - log Gamma(a + 0.5),   O = 2 b (1 + v)
      reg = |y - g| * (2 v + a)
    """
    y, gamma = _arr(y), _arr(gamma)
    v, alpha, beta = _arr(v), _arr(alpha), _arr(beta)
    _check_nig(v, alpha, beta)
    omega = 2.0 * beta * (1.0 + v)
    resid2 = (y - gamma) ** 2
    nll = (0.5 * np.log(np.pi / v)
           - alpha * np.log(omega)
           + (alpha + 0.5) * np.log(resid2 * v + omega)
           + gammaln(alpha) - gammaln(alpha + 0.5))
    reg = np.abs(y - gamma) * (2.0 * v + alpha)
    return float(np.mean(nll)), float(np.mean(reg))


def nig_nll_grad_gamma(y, gamma, v, alpha, beta) -> np.ndarray:
    """Analytic d nll / d gamma, voxel-wise (for gradient checks)."""
    y, gamma = _arr(y), _arr(gamma)
    v, alpha, beta = _arr(v), _arr(alpha), _arr(beta)
    _check_nig(v, alpha, beta)
    omega = 2.0 * beta * (1.0 + v)
    return np.asarray((alpha + 0.5) * (-2.0 * (y - gamma) * v)
                      / ((y - gamma) ** 2 * v + omega))


@dataclass(frozen=True)
class LossBreakdown:
    charbonnier: float
    ssim_loss: float
    nig_nll: float = 0.0
    nig_reg: float = 0.0
    alpha1: float = 0.5
    alpha2: float = 1.0
    lam: float = 0.01
    uncertainty: bool = False

    @property
    def total(self) -> float:
        t = self.charbonnier + self.alpha1 * self.ssim_loss
        if self.uncertainty:
            t += self.alpha2 * (self.nig_nll + self.lam * self.nig_reg)
        return t


def combined_loss(x, y, nig_maps=None, alpha1: float = 0.5, alpha2: float = 1.0,
                  lam: float = 0.01, eps: float = 1e-4,
                  ssim_window: int | None = None) -> LossBreakdown:
    """Charbonnier + alpha1 * SSIM loss (+ alpha2 * NIG loss when maps given).

    nig_maps, when present, is a (gamma, v, alpha, beta) tuple of arrays;
    the prediction x is conventionally gamma itself.
    """
    char = charbonnier(x, y, eps)
    sl = ssim_loss(x, y, ssim_window)
    if nig_maps is None:
        return LossBreakdown(char, sl, alpha1=alpha1, alpha2=alpha2, lam=lam)
    gamma, v, a, b = nig_maps
    nll, reg = nig_loss(y, gamma, v, a, b, lam)
    return LossBreakdown(char, sl, nll, reg, alpha1, alpha2, lam, uncertainty=True)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass
class QualityReport:
    ssim: float                  # mean of the windowed SSIM map (default window)
    ssim_volume: float           # literal whole-volume single-window SSIM
    psnr: float
    mse: float
    per_slice: list[tuple[int, float, float]] = field(default_factory=list)
    ssim_map_mean_window: int = 11

    def to_json(self) -> dict:
        return {
            "ssim": self.ssim,
            "ssim_volume": self.ssim_volume,
            "psnr": "inf" if math.isinf(self.psnr) else self.psnr,
            "mse": self.mse,
            "ssim_map_mean_window": self.ssim_map_mean_window,
            "per_slice": [
                {"slice": s, "ssim": ss, "psnr": "inf" if math.isinf(p) else p}
                for s, ss, p in self.per_slice
            ],
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1))


def evaluate_volume(x, y, window: int = 11) -> QualityReport:
    """Full quality report of restored x against reference y."""
    x, y = _arr(x), _arr(y)
    per_slice = []
    slice_ssims = []
    for s in range(x.shape[2]):
        _m, mean_s = ssim_map(x[:, :, s], y[:, :, s], window)
        per_slice.append((s, mean_s, psnr(x[:, :, s], y[:, :, s])))
        slice_ssims.append(mean_s)
    return QualityReport(
        ssim=float(np.mean(slice_ssims)),
        ssim_volume=ssim_global(x, y),
        psnr=psnr(x, y),
        mse=mse(x, y),
        per_slice=per_slice,
        ssim_map_mean_window=window,
    )


def write_batch_csv(rows: list[tuple[str, int, float, float]],
                    path: str | Path) -> None:
    """CSV with columns (volume_id, slice, ssim, psnr) for calibration input."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["volume_id", "slice", "ssim", "psnr"])
        for volume_id, sl, ss, p in rows:
            w.writerow([volume_id, sl, ss, "inf" if math.isinf(p) else p])
