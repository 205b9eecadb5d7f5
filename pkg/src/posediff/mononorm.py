"""Bijection between camera-frame poses and a monocular-normalized 9-vector.

A pose (R, t) maps to:

    [ r1 (3) | r2 (3) | tx_n | ty_n | tz_n ]

where r1, r2 are the first two columns of R and

    tx_n = f * t.x / (w * t.z)        # in-plane x, unitless
    ty_n = f * t.y / (h * t.z)        # in-plane y, unitless
    tz_n = t.z - c_z                  # depth offset, meters

With a centered principal point, tx_n equals the projected point's
fractional horizontal offset from the image center, so the translation
projects inside the image exactly when tx_n and ty_n lie in [-0.5, 0.5].
This makes the parameterization invariant to focal length and image size:
the same normalized value means the same relative image position on any
camera.

The inverse recovers depth first (t.z = tz_n + c_z), then the in-plane
translation, then the rotation via Gram-Schmidt. Changing R never changes
the translation components and vice versa.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveDepth
from .se3_camera import CameraIntrinsics, Pose, gram_schmidt_6d


@dataclass
class NormConfig:
    """Depth normalization offset and the valid working depth range (meters)."""

    c_z: float = 1.5
    z_min: float = 0.3
    z_max: float = 3.0

    def __post_init__(self):
        if not (0.0 < self.z_min < self.c_z < self.z_max):
            raise ValueError(
                f"need 0 < z_min < c_z < z_max, got ({self.z_min}, {self.c_z}, {self.z_max})"
            )


@dataclass
class NormalizedPose:
    """Monocular-normalized pose: 6 rotation components plus (tx_n, ty_n, tz_n).

    Arbitrary reals are legal (diffusion noise lands here); only
    `denormalize` imposes validity requirements.
    """

    rot6: np.ndarray
    tx_n: float
    ty_n: float
    tz_n: float

    def __post_init__(self):
        self.rot6 = np.asarray(self.rot6, dtype=float).reshape(6)

    def as_vector(self) -> np.ndarray:
        """Pack into the canonical 9-vector layout [rot6 | tx_n, ty_n, tz_n]."""
        return np.concatenate([self.rot6, [self.tx_n, self.ty_n, self.tz_n]])

    @classmethod
    def from_vector(cls, vec: np.ndarray) -> "NormalizedPose":
        vec = np.asarray(vec, dtype=float).reshape(9)
        return cls(vec[:6].copy(), float(vec[6]), float(vec[7]), float(vec[8]))


def normalize(pose: Pose, intrinsics: CameraIntrinsics, cfg: NormConfig) -> NormalizedPose:
    """Map a pose with positive depth to its normalized 9-vector form.

    Raises:
        NonPositiveDepth: if pose.t.z <= 0.
    """
    tz = pose.t[2]
    if tz <= 0:
        raise NonPositiveDepth(f"pose depth {tz} is not positive")
    tx_n = intrinsics.f * pose.t[0] / (intrinsics.w * tz)
    ty_n = intrinsics.f * pose.t[1] / (intrinsics.h * tz)
    return NormalizedPose(pose.rot6(), tx_n, ty_n, tz - cfg.c_z)


def denormalize(n: NormalizedPose, intrinsics: CameraIntrinsics, cfg: NormConfig) -> Pose:
    """Invert `normalize`: depth first, then in-plane translation, then rotation.

    Raises:
        NonPositiveDepth: if the recovered depth tz_n + c_z is not positive.
        DegenerateRotation6D: propagated from Gram-Schmidt.
    """
    tz = n.tz_n + cfg.c_z
    if tz <= 0:
        raise NonPositiveDepth(f"recovered depth {tz} is not positive")
    tx = (intrinsics.w * tz / intrinsics.f) * n.tx_n
    ty = (intrinsics.h * tz / intrinsics.f) * n.ty_n
    R = gram_schmidt_6d(n.rot6)
    return Pose(R, np.array([tx, ty, tz]))


def normalize_batch(
    R: np.ndarray,
    t: np.ndarray,
    f: np.ndarray,
    w: np.ndarray,
    h: np.ndarray,
    cfg: NormConfig,
) -> np.ndarray:
    """Vectorized `normalize` over N poses; intrinsics may be scalar or (N,).

    Returns an (N, 9) array. Depths must already be positive.
    """
    R = np.asarray(R, dtype=float).reshape(-1, 3, 3)
    t = np.asarray(t, dtype=float).reshape(-1, 3)
    tz = t[:, 2]
    if np.any(tz <= 0):
        raise NonPositiveDepth("batch contains non-positive depths")
    out = np.empty((R.shape[0], 9))
    out[:, 0:3] = R[:, :, 0]
    out[:, 3:6] = R[:, :, 1]
    out[:, 6] = f * t[:, 0] / (w * tz)
    out[:, 7] = f * t[:, 1] / (h * tz)
    out[:, 8] = tz - cfg.c_z
    return out


def denormalize_translation_batch(
    n: np.ndarray,
    f: np.ndarray,
    w: np.ndarray,
    h: np.ndarray,
    cfg: NormConfig,
) -> np.ndarray:
    """Vectorized translation recovery from (N, 9) normalized vectors.

    Rotation columns are ignored; use `gram_schmidt_6d` on n[:, :6] when the
    orientation is needed. Raises NonPositiveDepth if any recovered depth
    is not positive.
    """
    n = np.asarray(n, dtype=float).reshape(-1, 9)
    tz = n[:, 8] + cfg.c_z
    if np.any(tz <= 0):
        raise NonPositiveDepth("batch contains non-positive recovered depths")
    t = np.empty((n.shape[0], 3))
    t[:, 0] = (w * tz / f) * n[:, 6]
    t[:, 1] = (h * tz / f) * n[:, 7]
    t[:, 2] = tz
    return t
