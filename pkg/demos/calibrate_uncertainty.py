"""Walkthrough: calibrate quality against epistemic uncertainty.

Simulates a restoration model whose per-slice epistemic uncertainty tracks
true quality, fits linear (SSIM) and exponential (PSNR) relationships, and
checks 95% prediction-interval coverage on held-out points.

Run with `python3 demos/calibrate_uncertainty.py`.
"""

import numpy as np

from mrb import fit_exponential, fit_linear, predict_quality

rng = np.random.default_rng(7)

# Per-slice mean epistemic uncertainty, and the qualities it should predict.
u = rng.uniform(0.0, 0.1, size=400)
ssim = -2.5 * u + 0.96 + rng.normal(scale=0.01, size=u.size)
psnr = 18.0 * np.exp(-20.0 * u) + 23.0 + rng.normal(scale=0.4, size=u.size)

lin = fit_linear(u, ssim)
exp = fit_exponential(u, psnr)
print(f"linear SSIM fit:      slope={lin.params[0]:+.3f} "
      f"intercept={lin.params[1]:.3f} R2={lin.r_squared:.3f}")
print(f"exponential PSNR fit: p={exp.params[0]:.2f} q={exp.params[1]:.2f} "
      f"r={exp.params[2]:.2f} R2={exp.r_squared:.3f}")

u_new = rng.uniform(0.0, 0.1, size=500)
ssim_new = -2.5 * u_new + 0.96 + rng.normal(scale=0.01, size=u_new.size)
hits = [lo <= y <= hi
        for x, y in zip(u_new, ssim_new)
        for _est, lo, hi in [predict_quality(float(x), lin)]]
print(f"95% interval coverage on held-out slices: {np.mean(hits):.1%}")

est, lo, hi = predict_quality(0.05, lin)
print(f"reference-free estimate at u=0.05: ssim={est:.3f} [{lo:.3f}, {hi:.3f}]")
