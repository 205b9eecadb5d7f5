"""Pose denoiser contract: update strategy, supervision targets, oracles, loss.

A denoiser maps a noisy pose to a prediction triplet:

    v_xy  -- 2D displacement of the projected translation, in pixels
    dr6   -- 6D representation of the corrective rotation (left-multiplied)
    v_z   -- multiplicative depth ratio, > 0

`apply_update` turns the triplet into a denoised pose, depth first:

    z_hat  = v_z * z_t
    xy_hat = (v_xy / f + xy_t / z_t) * z_hat
    R_hat  = gram_schmidt(dr6) @ R_t

`compute_gt_targets` inverts it exactly, so apply_update(compute_gt_targets)
recovers the ground truth to machine precision.

Oracle denoisers replace a learned network at desk scale:

    PERFECT      exact targets.
    NOISY(s0)    targets corrupted by Gaussian noise whose std follows the
                 schedule, s0 * sqrt(1 - alpha_bar_t): predictions degrade
                 at larger conditioning timesteps exactly as the forward
                 noise grows. An imperfect oracle also has a bounded
                 correction range: when the input pose deviates beyond
                 `competence` (k-sigma) times the conditioning scale, the
                 correction is shrunk proportionally, so lying to the
                 denoiser about the timestep degrades it the way an
                 out-of-distribution input degrades a trained network.
                 s0 = 0 is bit-identical to PERFECT.
    BIASED(b)    constant pixel offset on v_xy, modeling systematic drift
                 and premature convergence.

Noise stds are matched per component to the diffusion scales, so a noise
level of s0 means the predicted pose deviates from ground truth by s0
units of forward-process noise regardless of camera intrinsics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyPointSet, NonPositiveDepth, OddEmbeddingSize
from .forward_diffusion import NoiseScales, Schedule
from .mononorm import NormConfig, normalize
from .robot_chain import JointConfig
from .se3_camera import CameraIntrinsics, Pose, gram_schmidt_6d

_IDENTITY_ROT6 = np.array([1.0, 0.0, 0.0, 0.0, 1.0, 0.0])


@dataclass
class DenoiserOutput:
    """Prediction triplet (v_xy pixels, dr6 rotation columns, v_z depth ratio)."""

    v_xy: np.ndarray
    dr6: np.ndarray
    v_z: float

    def __post_init__(self):
        self.v_xy = np.asarray(self.v_xy, dtype=float).reshape(2)
        self.dr6 = np.asarray(self.dr6, dtype=float).reshape(6)
        self.v_z = float(self.v_z)

    @classmethod
    def identity(cls) -> "DenoiserOutput":
        return cls(np.zeros(2), _IDENTITY_ROT6.copy(), 1.0)


@dataclass
class Observation:
    """Everything an estimation run may condition on for one scenario.

    Stands in for the image: ground truth (visible only to oracles), the
    camera, the joint configuration, and optionally noisy 2D keypoints.
    Keypoints behind the camera are stored as NaN rows.
    """

    gt_pose: Pose
    intrinsics: CameraIntrinsics
    joints: JointConfig
    keypoints_2d: np.ndarray | None = None


@dataclass
class TimestepEmbedding:
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(-1)


def embed_timestep(t: int, c_emb: int = 4) -> TimestepEmbedding:
    """Sinusoidal embedding: (sin, cos) pairs at geometrically spaced frequencies.

    values[2i] = sin(t / 10000^(2i/c_emb)), values[2i+1] the matching cosine.

    Raises:
        OddEmbeddingSize: if c_emb is odd.
        ValueError: if t < 0.
    """
    if c_emb % 2 != 0 or c_emb < 2:
        raise OddEmbeddingSize(f"embedding size must be a positive even number, got {c_emb}")
    if t < 0:
        raise ValueError(f"timestep must be non-negative, got {t}")
    i = np.arange(c_emb // 2)
    phase = t / np.power(10000.0, 2.0 * i / c_emb)
    values = np.empty(c_emb)
    values[0::2] = np.sin(phase)
    values[1::2] = np.cos(phase)
    return TimestepEmbedding(values)


def apply_update(pose_t: Pose, out: DenoiserOutput, intrinsics: CameraIntrinsics) -> Pose:
    """Apply a prediction triplet to a noisy pose; depth is updated first.

    Raises:
        NonPositiveDepth: if the input depth or v_z is not positive.
        DegenerateRotation6D: propagated from dr6 orthogonalization.
    """
    z_t = pose_t.t[2]
    if z_t <= 0:
        raise NonPositiveDepth(f"input pose depth {z_t} is not positive")
    if out.v_z <= 0:
        raise NonPositiveDepth(f"depth ratio {out.v_z} is not positive")
    z_hat = out.v_z * z_t
    xy_hat = (out.v_xy / intrinsics.f + pose_t.t[:2] / z_t) * z_hat
    R_hat = gram_schmidt_6d(out.dr6) @ pose_t.R
    return Pose(R_hat, np.array([xy_hat[0], xy_hat[1], z_hat]))


def compute_gt_targets(pose_t: Pose, pose0: Pose, intrinsics: CameraIntrinsics) -> DenoiserOutput:
    """Supervision triplet that maps pose_t exactly onto pose0 via apply_update.

    Raises:
        NonPositiveDepth: if either pose has non-positive depth.
    """
    z_t, z_0 = pose_t.t[2], pose0.t[2]
    if z_t <= 0 or z_0 <= 0:
        raise NonPositiveDepth("both poses must have positive depth")
    dR = pose0.R @ pose_t.R.T
    dr6 = np.concatenate([dR[:, 0], dR[:, 1]])
    v_z = z_0 / z_t
    v_xy = intrinsics.f * (pose0.t[:2] / z_0 - pose_t.t[:2] / z_t)
    return DenoiserOutput(v_xy, dr6, v_z)


def point_distance(pose_a: Pose, pose_b: Pose, points: np.ndarray) -> float:
    """Mean Euclidean distance between the two transforms of a point set.

    Raises:
        EmptyPointSet: on an empty point list.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if pts.shape[0] == 0:
        raise EmptyPointSet("point set is empty")
    diff = pose_a.transform(pts) - pose_b.transform(pts)
    return float(np.mean(np.linalg.norm(diff, axis=1)))


def decomposed_loss(
    pose0: Pose,
    pose_t: Pose,
    out: DenoiserOutput,
    points: np.ndarray,
    intrinsics: CameraIntrinsics,
) -> tuple[float, float, float, float]:
    """Per-prediction point-distance losses (loss_xy, loss_rot, loss_z, total).

    Each term rebuilds the denoised pose using one predicted component with
    the other two replaced by their ground-truth targets, so a term responds
    only to errors in its own component.
    """
    gt = compute_gt_targets(pose_t, pose0, intrinsics)
    pose_xy = apply_update(pose_t, DenoiserOutput(out.v_xy, gt.dr6, gt.v_z), intrinsics)
    pose_rot = apply_update(pose_t, DenoiserOutput(gt.v_xy, out.dr6, gt.v_z), intrinsics)
    pose_z = apply_update(pose_t, DenoiserOutput(gt.v_xy, gt.dr6, out.v_z), intrinsics)
    loss_xy = point_distance(pose0, pose_xy, points)
    loss_rot = point_distance(pose0, pose_rot, points)
    loss_z = point_distance(pose0, pose_z, points)
    return loss_xy, loss_rot, loss_z, loss_xy + loss_rot + loss_z


@dataclass
class PerfectOracle:
    """Returns exact ground-truth targets."""

    def predict(
        self, pose_t: Pose, t: int, obs: Observation, rng: np.random.Generator
    ) -> DenoiserOutput:
        return compute_gt_targets(pose_t, obs.gt_pose, obs.intrinsics)


@dataclass
class NoisyOracle:
    """Schedule-coupled imperfect denoiser; see module docstring.

    `competence` is the k-sigma half-width of the correction range relative
    to the conditioning timestep's noise scale. The range limit and the
    additive noise are both disabled at sigma0 = 0.
    """

    sigma0: float
    sched: Schedule
    scales: NoiseScales
    cfg: NormConfig
    competence: float = 3.0

    def predict(
        self, pose_t: Pose, t: int, obs: Observation, rng: np.random.Generator
    ) -> DenoiserOutput:
        exact = compute_gt_targets(pose_t, obs.gt_pose, obs.intrinsics)
        if self.sigma0 == 0.0:
            return exact

        level = np.sqrt(1.0 - self.sched.alpha_bar_at(t))
        K = obs.intrinsics
        z_t = pose_t.t[2]

        # Correction range limit: deviation measured in units of the
        # per-component diffusion scales, compared with the k-sigma window
        # implied by the conditioning timestep.
        n_t = normalize(pose_t, K, self.cfg).as_vector()
        n_0 = normalize(obs.gt_pose, K, self.cfg).as_vector()
        rel = (n_t - n_0) / self.scales.as_vector()
        deviation = float(np.linalg.norm(rel)) / 3.0
        window = self.competence * level
        v_xy, dr6, v_z = exact.v_xy, exact.dr6, exact.v_z
        if deviation > window:
            c = window / deviation
            v_xy = c * v_xy
            dr6 = _IDENTITY_ROT6 + c * (dr6 - _IDENTITY_ROT6)
            v_z = 1.0 + c * (v_z - 1.0)

        # Additive prediction noise, matched per component to the forward
        # noise scales so sigma0 is in schedule units.
        sigma = self.sigma0 * level
        z = rng.standard_normal(9)
        dr6 = dr6 + sigma * self.scales.s_rot * z[:6]
        v_xy = v_xy + sigma * self.scales.s_xy * np.array([K.w, K.h]) * z[6:8]
        v_z = v_z + sigma * (self.scales.s_z / z_t) * z[8]
        v_z = max(v_z, 1e-9)
        return DenoiserOutput(v_xy, dr6, v_z)


@dataclass
class BiasedOracle:
    """Exact targets with a constant pixel offset on v_xy."""

    bias: float

    def predict(
        self, pose_t: Pose, t: int, obs: Observation, rng: np.random.Generator
    ) -> DenoiserOutput:
        exact = compute_gt_targets(pose_t, obs.gt_pose, obs.intrinsics)
        return DenoiserOutput(exact.v_xy + self.bias, exact.dr6, exact.v_z)


def parse_denoiser(
    spec: str,
    sched: Schedule,
    scales: NoiseScales,
    cfg: NormConfig,
    competence: float = 3.0,
):
    """Build an oracle from a CLI-style spec: perfect | noisy:S0 | biased:PX."""
    name, _, arg = spec.partition(":")
    name = name.strip().lower()
    if name == "perfect":
        return PerfectOracle()
    if name == "noisy":
        return NoisyOracle(
            sigma0=float(arg or 0.1),
            sched=sched,
            scales=scales,
            cfg=cfg,
            competence=competence,
        )
    if name == "biased":
        return BiasedOracle(bias=float(arg or 5.0))
    raise ValueError(f"unknown denoiser kind: {spec!r}")


def denoise(
    pose_t: Pose,
    t: int,
    obs: Observation,
    oracle,
    rng: np.random.Generator,
) -> Pose:
    """One denoiser application: predict a triplet and apply it to pose_t."""
    out = oracle.predict(pose_t, t, obs, rng)
    return apply_update(pose_t, out, obs.intrinsics)
