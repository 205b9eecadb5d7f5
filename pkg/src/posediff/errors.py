"""Exception types shared across the package.

Everything derives from PoseDiffError (a ValueError) so callers can catch
the whole family or individual conditions.
"""


class PoseDiffError(ValueError):
    """Base class for all posediff errors."""


class DegenerateRotation6D(PoseDiffError):
    """6D rotation input cannot be orthogonalized (near-zero or collinear columns)."""


class BehindCamera(PoseDiffError):
    """Point has non-positive depth and cannot be projected."""


class NonPositiveDepth(PoseDiffError):
    """Pose depth (t.z) must be strictly positive for this operation."""


class EmptyPointSet(PoseDiffError):
    """An operation requiring at least one point received none."""


class InvalidScheduleParams(PoseDiffError):
    """Noise-schedule parameters violate their constraints."""


class OddEmbeddingSize(PoseDiffError):
    """Sinusoidal embedding size must be even."""


class DimensionMismatch(PoseDiffError):
    """Array size does not match the expected dimension."""


class InvalidTimestepOrder(PoseDiffError):
    """Reverse step requires t > t_prev >= 0."""


class InvalidIterationCount(PoseDiffError):
    """Iteration count must be at least 1."""


class InvalidRange(PoseDiffError):
    """Sampling range is empty or inverted."""


class InvalidConfig(PoseDiffError):
    """Configuration failed validation; message names the offending field."""
