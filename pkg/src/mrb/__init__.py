"""MR volume degradation, motion-artifact synthesis, evaluation and calibration."""

from . import calibration, errors, kspace, motion, patching, quality, volume
from .calibration import CalibrationModel, NIGMaps, fit_exponential, fit_linear, \
    mean_epistemic_per_slice, nig_moments, predict_quality
from .kspace import DownsampleStrategy, acceleration_factor, downsample, fft3, \
    ifft3, retention_ratio, strategy_catalog, truncate
from .motion import MotionSchedule, Pose, apply_motion, build_schedule, \
    centric_order, corrupted_ratio, rotate_volume
from .patching import PatchSet, PatchSpec, assemble, crop, self_ensemble
from .quality import LossBreakdown, QualityReport, charbonnier, combined_loss, \
    evaluate_volume, mse, nig_loss, psnr, ssim_global, ssim_loss, ssim_map
from .volume import KSpaceGrid, Volume, load_nifti, load_volume, make_phantom, \
    normalize, store_volume

__version__ = "0.1.0"
