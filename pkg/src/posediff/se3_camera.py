"""SE(3) pose and pinhole-camera primitives.

Coordinate conventions
======================
Camera frame (right-handed, standard computer vision):
  - X right, Y down, Z forward along the optical axis.
  - A robot pose used in the camera frame must have t.z > 0.

Image frame:
  - Origin top-left, u right (width), v down (height), units pixels.
  - Principal point defaults to the image center (w/2, h/2).

6D rotation representation:
  - A length-6 vector holding the first two COLUMNS of a rotation matrix,
    (r1, r2), concatenated. Arbitrary reals are legal input to
    `gram_schmidt_6d`; orthogonalization recovers a full SO(3) matrix with
    the third column u1 x u2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BehindCamera, DegenerateRotation6D, EmptyPointSet

# Norm below which a 6D rotation input is treated as degenerate.
GS_EPS = 1e-8

# Slack (pixels / meters) for frustum boundary comparisons, so translations
# clamped exactly onto the boundary still count as inside.
FRUSTUM_TOL = 1e-6


@dataclass
class Pose:
    """Rigid transform: 3x3 orientation `R` plus translation `t` in meters."""

    R: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        self.R = np.asarray(self.R, dtype=float)
        self.t = np.asarray(self.t, dtype=float).reshape(3)
        if self.R.shape != (3, 3):
            raise ValueError(f"R must be 3x3, got {self.R.shape}")

    @classmethod
    def identity(cls, depth: float = 1.5) -> "Pose":
        return cls(np.eye(3), np.array([0.0, 0.0, depth]))

    def rot6(self) -> np.ndarray:
        """First two columns of R, concatenated into a length-6 vector."""
        return np.concatenate([self.R[:, 0], self.R[:, 1]])

    def matrix(self) -> np.ndarray:
        """4x4 homogeneous matrix [[R, t], [0, 1]]."""
        H = np.eye(4)
        H[:3, :3] = self.R
        H[:3, 3] = self.t
        return H

    def transform(self, points: np.ndarray) -> np.ndarray:
        """Apply the transform to an (N, 3) array of points."""
        pts = np.asarray(points, dtype=float)
        return pts @ self.R.T + self.t

    def rotation_error(self) -> float:
        """Max deviation of R from SO(3): orthonormality plus determinant."""
        ortho = np.abs(self.R.T @ self.R - np.eye(3)).max()
        return max(ortho, abs(np.linalg.det(self.R) - 1.0))

    def validate(self, atol: float = 1e-9) -> "Pose":
        if self.rotation_error() > atol:
            raise ValueError("R is not a rotation matrix within tolerance")
        return self

    def copy(self) -> "Pose":
        return Pose(self.R.copy(), self.t.copy())


@dataclass
class CameraIntrinsics:
    """Pinhole intrinsics: focal length and image size in pixels.

    A single focal length is used for both axes. cx/cy default to the
    image center.
    """

    f: float
    w: int
    h: int
    cx: float = None  # type: ignore[assignment]
    cy: float = None  # type: ignore[assignment]

    def __post_init__(self):
        if self.f <= 0 or self.w <= 0 or self.h <= 0:
            raise ValueError("f, w, h must all be positive")
        if self.cx is None:
            self.cx = self.w / 2.0
        if self.cy is None:
            self.cy = self.h / 2.0

    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.f, 0.0, self.cx], [0.0, self.f, self.cy], [0.0, 0.0, 1.0]]
        )


@dataclass
class CropRect:
    """Axis-aligned crop region plus the target size it will be rescaled to.

    Coordinates are sub-pixel floats; the extent matches the target aspect
    ratio exactly so rescaling to (target_w, target_h) is isotropic.
    """

    u0: float
    v0: float
    width: float
    height: float
    target_w: int = 320
    target_h: int = 240

    def aspect_error(self) -> float:
        """Pixel deviation of width from the target aspect ratio."""
        return abs(self.width - self.height * self.target_w / self.target_h)

    def contains(self, uv: np.ndarray, tol: float = 0.0) -> bool:
        uv = np.atleast_2d(np.asarray(uv, dtype=float))
        inside_u = (uv[:, 0] >= self.u0 - tol) & (uv[:, 0] <= self.u0 + self.width + tol)
        inside_v = (uv[:, 1] >= self.v0 - tol) & (uv[:, 1] <= self.v0 + self.height + tol)
        return bool(np.all(inside_u & inside_v))


def gram_schmidt_6d(r6: np.ndarray) -> np.ndarray:
    """Orthogonalize a 6D rotation representation into an SO(3) matrix.

    Accepts shape (..., 6); returns (..., 3, 3). The first three entries are
    the (unnormalized) first column, the last three the second-column hint:

        u1 = r1 / ||r1||
        u2 = normalize(r2 - (r2 . u1) u1)
        u3 = u1 x u2

    Raises:
        DegenerateRotation6D: if ||r1|| < GS_EPS or the component of r2
            orthogonal to r1 has norm < GS_EPS anywhere in the batch.
    """
    r6 = np.asarray(r6, dtype=float)
    if r6.shape[-1] != 6:
        raise ValueError(f"expected trailing dimension 6, got {r6.shape}")
    r1 = r6[..., :3]
    r2 = r6[..., 3:]

    n1 = np.linalg.norm(r1, axis=-1, keepdims=True)
    if np.any(n1 < GS_EPS):
        raise DegenerateRotation6D("first column norm below threshold")
    u1 = r1 / n1

    dot = np.sum(r2 * u1, axis=-1, keepdims=True)
    v2 = r2 - dot * u1
    n2 = np.linalg.norm(v2, axis=-1, keepdims=True)
    if np.any(n2 < GS_EPS):
        raise DegenerateRotation6D("second column is collinear with the first")
    u2 = v2 / n2

    u3 = np.cross(u1, u2)
    return np.stack([u1, u2, u3], axis=-1)


def project_point(p: np.ndarray, intrinsics: CameraIntrinsics) -> np.ndarray:
    """Pinhole projection of a camera-frame point (meters) to pixels.

    Raises:
        BehindCamera: if p.z <= 0.
    """
    p = np.asarray(p, dtype=float).reshape(3)
    if p[2] <= 0:
        raise BehindCamera(f"point depth {p[2]} is not positive")
    u = intrinsics.f * (p[0] / p[2]) + intrinsics.cx
    v = intrinsics.f * (p[1] / p[2]) + intrinsics.cy
    return np.array([u, v])


def project_points(points: np.ndarray, intrinsics: CameraIntrinsics) -> np.ndarray:
    """Batched projection of (N, 3) camera-frame points to (N, 2) pixels."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if pts.shape[0] == 0:
        raise EmptyPointSet("no points to project")
    if np.any(pts[:, 2] <= 0):
        raise BehindCamera("at least one point has non-positive depth")
    uv = pts[:, :2] / pts[:, 2:3]
    uv = uv * intrinsics.f
    uv[:, 0] += intrinsics.cx
    uv[:, 1] += intrinsics.cy
    return uv


def in_frustum(
    pose: Pose,
    intrinsics: CameraIntrinsics,
    margin: float = 0.05,
    z_range: tuple[float, float] = (0.3, 3.0),
) -> bool:
    """True iff the pose's translation projects inside the margin-shrunk image
    and its depth lies in `z_range`.

    Boundary comparisons carry a small tolerance so values clamped exactly to
    the frustum boundary count as inside. A pose behind the camera is False,
    never an error.
    """
    z = pose.t[2]
    z_min, z_max = z_range
    if z <= 0:
        return False
    if z < z_min - FRUSTUM_TOL or z > z_max + FRUSTUM_TOL:
        return False
    u, v = project_point(pose.t, intrinsics)
    lo_u, hi_u = margin * intrinsics.w, (1.0 - margin) * intrinsics.w
    lo_v, hi_v = margin * intrinsics.h, (1.0 - margin) * intrinsics.h
    return (
        lo_u - FRUSTUM_TOL <= u <= hi_u + FRUSTUM_TOL
        and lo_v - FRUSTUM_TOL <= v <= hi_v + FRUSTUM_TOL
    )


def crop_region(
    points: np.ndarray,
    intrinsics: CameraIntrinsics,
    target: tuple[int, int] = (320, 240),
    expand: float = 1.4,
    min_size: float = 32.0,
) -> CropRect:
    """Image-space crop covering the projected points, at the target aspect.

    The tight projected bounding box is inflated by `expand` about its
    center, grown to at least `min_size` pixels per side, then grown along
    one axis to match the target aspect ratio exactly. Growth only ever
    enlarges the box, so the rect always contains every projected point.

    Raises:
        EmptyPointSet: on an empty input list.
        BehindCamera: if any point has non-positive depth.
    """
    uv = project_points(points, intrinsics)
    target_w, target_h = target
    if target_w <= 0 or target_h <= 0:
        raise ValueError("target size must be positive")

    lo = uv.min(axis=0)
    hi = uv.max(axis=0)
    center = (lo + hi) / 2.0
    w = (hi[0] - lo[0]) * expand
    h = (hi[1] - lo[1]) * expand

    w = max(w, min_size)
    h = max(h, min_size)

    ratio = target_w / target_h
    if w / h < ratio:
        w = h * ratio
    else:
        h = w / ratio

    return CropRect(
        u0=float(center[0] - w / 2.0),
        v0=float(center[1] - h / 2.0),
        width=float(w),
        height=float(h),
        target_w=target_w,
        target_h=target_h,
    )
