"""Exception hierarchy shared across the toolkit."""


class MrbError(Exception):
    """Base class for all toolkit errors."""


class DegenerateRange(MrbError):
    """Volume has zero intensity range, cannot be min-max normalized."""


class FormatError(MrbError):
    """On-disk payload does not match its declared format."""


class IoError(MrbError):
    """File could not be read or written."""


class UnsupportedKind(MrbError):
    """Unknown phantom kind."""


class IndivisibleDims(MrbError):
    """Downsampling scale does not divide the volume dimensions."""


class InvalidPattern(MrbError):
    """Motion pattern parameters are inconsistent."""


class ScheduleMismatch(MrbError):
    """Motion schedule length does not match the acquisition model."""


class VolumeTooSmall(MrbError):
    """Volume is smaller than one patch in some axis."""


class CoverageGap(MrbError):
    """Patch set leaves voxels of the source volume uncovered."""


class MissingSlice(MrbError):
    """Self-ensemble input has a slice index with no prediction."""


class WindowTooLarge(MrbError):
    """SSIM window exceeds the in-plane image size."""


class IdenticalImages(MrbError):
    """PSNR requested for identical images (infinite)."""


class DomainError(MrbError):
    """NIG hyperparameters violate v > 0, alpha > 1 or beta > 0."""


class DegenerateInput(MrbError):
    """Regression input has no usable variance or too few points."""


class NoConvergence(MrbError):
    """Iterative fit exceeded its iteration cap."""


class ManifestError(MrbError):
    """Pipeline manifest failed validation."""
