"""Differentiable losses mirroring the mrb quality module, plus gradcheck.

Tensors are channels-first (B, S, H, W) or (S, H, W); statistics for the
structural term are taken per slice over the in-plane axes, matching the
numpy reference definitions value-for-value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch

from .errors import GradMismatch

C1 = 0.01 ** 2
C2 = 0.03 ** 2


def charbonnier(x: torch.Tensor, y: torch.Tensor,
                eps: float = 1e-4) -> torch.Tensor:
    """Differentiable L1: mean sqrt((x - y)^2 + eps); floor sqrt(eps)."""
    return torch.sqrt((x - y) ** 2 + eps).mean()


def _ssim_per_slice(x: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
    """Whole-slice SSIM over the trailing two axes, per leading index."""
    dims = (-2, -1)
    mu_x = x.mean(dim=dims)
    mu_y = y.mean(dim=dims)
    var_x = x.var(dim=dims, unbiased=False)
    var_y = y.var(dim=dims, unbiased=False)
    cov = ((x - mu_x[..., None, None]) * (y - mu_y[..., None, None])).mean(dims)
    return ((2 * mu_x * mu_y + C1) * (2 * cov + C2)
            / ((mu_x**2 + mu_y**2 + C1) * (var_x + var_y + C2)))


def ssim_loss(x: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
    """Mean over slices of |1 - SSIM^2| with whole-slice statistics."""
    s = _ssim_per_slice(x, y)
    return torch.abs(1.0 - s * s).mean()


def nig_loss(y: torch.Tensor, gamma: torch.Tensor, v: torch.Tensor,
             alpha: torch.Tensor, beta: torch.Tensor
             ) -> tuple[torch.Tensor, torch.Tensor]:
    """Normal-Inverse-Gamma NLL and evidence regularizer (voxel means)."""
    omega = 2.0 * beta * (1.0 + v)
    resid2 = (y - gamma) ** 2
    nll = (0.5 * torch.log(torch.pi / v)
           - alpha * torch.log(omega)
           + (alpha + 0.5) * torch.log(resid2 * v + omega)
           + torch.lgamma(alpha) - torch.lgamma(alpha + 0.5))
    reg = torch.abs(y - gamma) * (2.0 * v + alpha)
    return nll.mean(), reg.mean()


def combined_loss(pred, target: torch.Tensor, alpha1: float = 0.5,
                  alpha2: float = 1.0, lam: float = 0.01,
                  eps: float = 1e-4) -> torch.Tensor:
    """charbonnier + alpha1*ssim_loss + alpha2*(nig_nll + lam*nig_reg).

    pred is either gamma or the (gamma, v, alpha, beta) head output; the
    evidential term is active only when the maps are present and alpha2 != 0.
    """
    if isinstance(pred, tuple):
        gamma, v, a, b = pred
    else:
        gamma, v, a, b = pred, None, None, None
    total = charbonnier(gamma, target, eps) + alpha1 * ssim_loss(gamma, target)
    if v is not None and alpha2 != 0.0:
        nll, reg = nig_loss(target, gamma, v, a, b)
        total = total + alpha2 * (nll + lam * reg)
    return total


@dataclass(frozen=True)
class GradReport:
    name: str
    max_rel_err: float
    worst_index: tuple[int, ...]


def gradcheck(fn, x: torch.Tensor, step: float = 1e-3,
              tol: float = 1e-4, name: str = "loss") -> GradReport:
    """Compare autograd d fn/d x against central finite differences.

    Relative error is measured against max(|analytic|, |numeric|, 1e-8)
    element-wise; raises GradMismatch naming the worst element past tol.
    """
    x = x.detach().double().requires_grad_(True)
    fn(x).backward()
    analytic = x.grad.detach().clone()
    numeric = torch.zeros_like(analytic)
    flat = x.detach().clone().reshape(-1)
    for i in range(flat.numel()):
        for sign in (1.0, -1.0):
            probe = flat.clone()
            probe[i] += sign * step
            val = fn(probe.reshape(x.shape)).item()
            numeric.reshape(-1)[i] += sign * val / (2.0 * step)
    denom = torch.clamp(torch.maximum(analytic.abs(), numeric.abs()),
                        min=1e-8)
    rel = ((analytic - numeric).abs() / denom)
    worst = int(rel.argmax())
    report = GradReport(name, float(rel.max()),
                        tuple(torch.unravel_index(torch.tensor(worst),
                                                  rel.shape)[i].item()
                              for i in range(rel.dim())))
    if report.max_rel_err > tol:
        raise GradMismatch(
            f"{name}: gradient mismatch {report.max_rel_err:.2e} at index "
            f"{report.worst_index} (tol {tol})")
    return report
