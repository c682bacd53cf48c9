"""NIG uncertainty moments and uncertainty -> SSIM/PSNR regression calibration.

From the per-voxel Normal-Inverse-Gamma hyperparameters the prediction,
aleatoric and epistemic maps are computed.  Mean epistemic uncertainty per
slice is then regressed against SSIM (linear) and PSNR (exponential) with
classical t-based 95% prediction intervals, so quality can be predicted
when no ground truth exists.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import optimize, stats

from .errors import DegenerateInput, DomainError, NoConvergence
from .volume import Volume

__all__ = [
    "NIGMaps",
    "CalibrationModel",
    "nig_moments",
    "mean_epistemic_per_slice",
    "fit_linear",
    "fit_exponential",
    "predict_quality",
    "read_points_csv",
]


def _arr(x) -> np.ndarray:
    return np.asarray(x.data if isinstance(x, Volume) else x, dtype=np.float64)


@dataclass(frozen=True)
class NIGMaps:
    """Per-voxel (gamma, v, alpha, beta) hyperparameter maps of equal dims."""

    gamma: np.ndarray
    v: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        g, v, a, b = (_arr(f) for f in (self.gamma, self.v, self.alpha, self.beta))
        if not (g.shape == v.shape == a.shape == b.shape):
            raise ValueError("NIG maps must share dims")
        if np.any(v <= 0) or np.any(a <= 1) or np.any(b <= 0):
            raise DomainError("NIG maps require v > 0, alpha > 1, beta > 0")
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)


def nig_moments(m: NIGMaps) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(prediction, aleatoric, epistemic) = (gamma, beta/(alpha-1), beta/(v(alpha-1)))."""
    aleatoric = m.beta / (m.alpha - 1.0)
    epistemic = m.beta / (m.v * (m.alpha - 1.0))
    return m.gamma, aleatoric, epistemic


def mean_epistemic_per_slice(epistemic) -> list[tuple[int, float]]:
    """Arithmetic mean over each SL-indexed slice."""
    e = _arr(epistemic)
    return [(s, float(e[:, :, s].mean())) for s in range(e.shape[2])]


@dataclass(frozen=True)
class CalibrationModel:
    """Fitted uncertainty->quality regression with prediction-interval stats.

    kind "linear-ssim": params = [slope, intercept]
    kind "exponential-psnr": params = [p, q, r] for p*exp(q*u) + r
    """

    kind: str
    params: tuple[float, ...]
    residual_std: float
    n_fit: int
    r_squared: float
    pi_level: float = 0.95
    u_mean: float = 0.0
    u_sxx: float = 0.0

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "params": list(self.params),
            "residual_std": self.residual_std,
            "n_fit": self.n_fit,
            "r_squared": self.r_squared,
            "pi_level": self.pi_level,
            "u_mean": self.u_mean,
            "u_sxx": self.u_sxx,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1))

    @classmethod
    def from_json(cls, d: dict) -> "CalibrationModel":
        return cls(d["kind"], tuple(d["params"]), d["residual_std"], d["n_fit"],
                   d["r_squared"], d.get("pi_level", 0.95),
                   d.get("u_mean", 0.0), d.get("u_sxx", 0.0))

    @classmethod
    def load(cls, path: str | Path) -> "CalibrationModel":
        return cls.from_json(json.loads(Path(path).read_text()))


def _r_squared(y: np.ndarray, yhat: np.ndarray) -> float:
    sst = float(np.sum((y - y.mean()) ** 2))
    sse = float(np.sum((y - yhat) ** 2))
    if sst == 0.0:
        return 1.0 if sse == 0.0 else 0.0
    return max(0.0, 1.0 - sse / sst)


def fit_linear(u, ssim, pi_level: float = 0.95) -> CalibrationModel:
    """Ordinary least squares ssim = slope*u + intercept with t-based PI."""
    u = np.asarray(u, dtype=np.float64)
    y = np.asarray(ssim, dtype=np.float64)
    if u.size < 3 or u.size != y.size:
        raise DegenerateInput("need >= 3 matched points")
    sxx = float(np.sum((u - u.mean()) ** 2))
    if sxx == 0.0:
        raise DegenerateInput("u has no variance")
    slope = float(np.sum((u - u.mean()) * (y - y.mean())) / sxx)
    intercept = float(y.mean() - slope * u.mean())
    yhat = slope * u + intercept
    dof = u.size - 2
    resid_std = math.sqrt(float(np.sum((y - yhat) ** 2)) / dof)
    return CalibrationModel("linear-ssim", (slope, intercept), resid_std,
                            int(u.size), _r_squared(y, yhat), pi_level,
                            float(u.mean()), sxx)


def _exp_model(u, p, q, r):
    return p * np.exp(q * u) + r


def fit_exponential(u, psnr, pi_level: float = 0.95,
                    max_iter: int = 500) -> CalibrationModel:
    """Fit psnr = p*exp(q*u) + r by iterative least squares.

    Initialized from a log-linear pre-fit of log(psnr - (min - 1)) against u;
    a small grid of alternative (sign-flipped, rescaled) starts is also
    tried and the best residual wins.
    """
    u = np.asarray(u, dtype=np.float64)
    y = np.asarray(psnr, dtype=np.float64)
    if u.size < 4 or u.size != y.size:
        raise DegenerateInput("need >= 4 matched points")
    if float(np.sum((u - u.mean()) ** 2)) == 0.0:
        raise DegenerateInput("u has no variance")

    shift = y.min() - 1.0
    logy = np.log(y - shift)
    q0, logp0 = np.polyfit(u, logy, 1)
    starts = [(math.exp(logp0), q0, shift)]
    # re-initializations: flipped curvature and flipped offset side
    starts.append((-(math.exp(logp0)), -q0, y.max() + 1.0))
    starts.append((y.std() if y.std() > 0 else 1.0, -abs(q0) or -1.0, y.mean()))
    starts.append((y.std() if y.std() > 0 else 1.0, abs(q0) or 1.0, y.mean()))

    best = None
    for p0 in starts:
        try:
            res = optimize.least_squares(
                lambda th: _exp_model(u, *th) - y, x0=p0,
                max_nfev=max_iter, xtol=1e-12, ftol=1e-14, gtol=1e-14)
        except Exception:
            continue
        if best is None or res.cost < best.cost:
            best = res
    if best is None or not np.all(np.isfinite(best.x)):
        raise NoConvergence("exponential fit failed from all initializations")
    p, q, r = (float(t) for t in best.x)
    yhat = _exp_model(u, p, q, r)
    dof = max(u.size - 3, 1)
    resid_std = math.sqrt(float(np.sum((y - yhat) ** 2)) / dof)
    return CalibrationModel("exponential-psnr", (p, q, r), resid_std,
                            int(u.size), _r_squared(y, yhat), pi_level,
                            float(u.mean()), float(np.sum((u - u.mean()) ** 2)))


def predict_quality(u_mean: float, model: CalibrationModel
                    ) -> tuple[float, float, float]:
    """Point estimate and prediction interval at the model's pi_level."""
    alpha = 1.0 - model.pi_level
    if model.kind == "linear-ssim":
        slope, intercept = model.params
        est = slope * u_mean + intercept
        dof = model.n_fit - 2
        # standard OLS prediction interval with the leverage term
        se = model.residual_std * math.sqrt(
            1.0 + 1.0 / model.n_fit
            + (u_mean - model.u_mean) ** 2 / model.u_sxx)
    elif model.kind == "exponential-psnr":
        p, q, r = model.params
        est = float(_exp_model(np.asarray(u_mean), p, q, r))
        dof = max(model.n_fit - 3, 1)
        se = model.residual_std * math.sqrt(1.0 + 1.0 / model.n_fit)
    else:
        raise ValueError(f"unknown model kind {model.kind!r}")
    if model.residual_std == 0.0:
        return est, est, est
    t = stats.t.ppf(1.0 - alpha / 2.0, dof)
    return est, est - t * se, est + t * se


def read_points_csv(quality_csv: str | Path, epistemic_csv: str | Path,
                    metric: str = "ssim") -> tuple[list[float], list[float]]:
    """Join (volume_id, slice) keys of the quality CSV and the epistemic CSV."""
    qual: dict[tuple[str, int], float] = {}
    with open(quality_csv, newline="") as f:
        for row in csv.DictReader(f):
            val = row[metric]
            if val == "inf":
                continue
            qual[(row["volume_id"], int(row["slice"]))] = float(val)
    u, y = [], []
    with open(epistemic_csv, newline="") as f:
        for row in csv.DictReader(f):
            key = (row["volume_id"], int(row["slice"]))
            if key in qual:
                u.append(float(row["mean_epistemic"]))
                y.append(qual[key])
    return u, y
