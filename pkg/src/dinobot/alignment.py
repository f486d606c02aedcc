"""Rigid alignment from matched correspondences.

Matched patch centers are back-projected through the pinhole model into two
camera-frame point clouds C1 (live) and C2 (reference); a weighted
least-squares rigid transform T with T(C1) ~ C2 is then solved either with
full 6 degrees of freedom (weighted SVD, reflection-safe) or constrained to
in-plane translation plus yaw about the optical axis.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np

from .errors import (
    DegenerateConfigurationError,
    DimensionMismatchError,
    NoValidPairsError,
    TooFewPointsError,
)
from .geometry import RigidTransform, rotation_about_z, rotation_error_deg
from .matching import MatchConfig, MatchPair, best_buddies
from .model import CameraIntrinsics, FeatureBundle

AlignmentMode = Literal["4dof", "6dof"]

MIN_POINTS_6DOF = 3
MIN_POINTS_4DOF = 2

# relative spread below which a point set cannot pin down the rotation
_DEGENERACY_RTOL = 1e-9


@dataclass(frozen=True)
class KeypointSet:
    """Weighted 3D points in one camera frame."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise DimensionMismatchError("keypoints must be (N, 3)")
        wts = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if wts.shape[0] != pts.shape[0]:
            raise DimensionMismatchError("one weight per keypoint required")
        if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(wts))):
            raise DimensionMismatchError("keypoints and weights must be finite")
        if np.any(wts <= 0):
            raise NoValidPairsError("keypoint weights must be positive")
        pts = pts.copy()
        wts = wts.copy()
        pts.setflags(write=False)
        wts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", wts)

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class AlignmentSolution:
    transform: RigidTransform
    residual: float
    inlier_count: int


def back_project(
    pairs: Sequence[MatchPair],
    depth_a: np.ndarray,
    depth_b: np.ndarray,
    intrinsics: CameraIntrinsics,
    weighting: Literal["similarity", "uniform"] = "similarity",
) -> tuple[KeypointSet, KeypointSet]:
    """Lift matched pixels into camera-frame 3D using per-pixel depth.

    Depth is sampled at the rounded pixel; a pair is dropped when either
    side has invalid depth (<= 0 or NaN). Under similarity weighting,
    pairs with non-positive similarity are dropped too, since weights must
    stay positive; uniform weighting keeps them at weight 1.
    """
    da = np.asarray(depth_a, dtype=np.float64)
    db = np.asarray(depth_b, dtype=np.float64)
    if da.ndim != 2 or db.ndim != 2:
        raise DimensionMismatchError("depth maps must be 2-D")
    pts_a, pts_b, wts = [], [], []
    for pair in pairs:
        za = _sample_depth(da, pair.pixel_a)
        zb = _sample_depth(db, pair.pixel_b)
        if za is None or zb is None:
            continue
        if weighting == "similarity":
            if pair.similarity <= 0:
                continue
            weight = pair.similarity
        else:
            weight = 1.0
        pts_a.append(_lift(pair.pixel_a, za, intrinsics))
        pts_b.append(_lift(pair.pixel_b, zb, intrinsics))
        wts.append(weight)
    if not pts_a:
        raise NoValidPairsError("no pairs with valid depth on both sides")
    return (
        KeypointSet(np.array(pts_a), np.array(wts)),
        KeypointSet(np.array(pts_b), np.array(wts)),
    )


def _sample_depth(depth: np.ndarray, pixel: tuple[float, float]) -> Optional[float]:
    u, v = pixel
    h, w = depth.shape
    col = min(max(int(round(u)), 0), w - 1)
    row = min(max(int(round(v)), 0), h - 1)
    z = float(depth[row, col])
    if not np.isfinite(z) or z <= 0:
        return None
    return z


def _lift(pixel: tuple[float, float], z: float, k: CameraIntrinsics) -> np.ndarray:
    u, v = pixel
    return np.array([z * (u - k.cx) / k.fx, z * (v - k.cy) / k.fy, z])


def weighted_rms(transform: RigidTransform, c1: KeypointSet, c2: KeypointSet) -> float:
    """Weighted RMS distance between T(C1) and C2, in meters."""
    diff = transform.apply(c1.points) - c2.points
    w = c1.weights
    return float(np.sqrt(np.sum(w * np.sum(diff * diff, axis=1)) / np.sum(w)))


def _check_sets(c1: KeypointSet, c2: KeypointSet, minimum: int) -> None:
    if len(c1) != len(c2):
        raise DimensionMismatchError(
            f"correspondence sets disagree in size: {len(c1)} vs {len(c2)}"
        )
    if len(c1) < minimum:
        raise TooFewPointsError(f"need at least {minimum} correspondences, got {len(c1)}")


def solve_rigid_6dof(c1: KeypointSet, c2: KeypointSet) -> AlignmentSolution:
    """Weighted least-squares rigid transform (rotation + translation).

    Cross-covariance SVD with the determinant sign fix on the smallest
    singular vector, so the result is always a proper rotation even when a
    reflection would fit better. Collinear or coincident inputs cannot pin
    down the rotation and raise DegenerateConfiguration.
    """
    _check_sets(c1, c2, MIN_POINTS_6DOF)
    w = c1.weights / np.sum(c1.weights)
    centroid1 = w @ c1.points
    centroid2 = w @ c2.points
    x = c1.points - centroid1
    y = c2.points - centroid2
    cov = (x * w[:, None]).T @ y
    u, s, vt = np.linalg.svd(cov)
    scale = float(s[0])
    if scale <= 0.0 or float(s[1]) <= _DEGENERACY_RTOL * scale:
        raise DegenerateConfigurationError(
            "correspondences are collinear or coincident; rotation is not unique"
        )
    d = np.sign(np.linalg.det(vt.T @ u.T))
    rotation = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    translation = centroid2 - rotation @ centroid1
    transform = RigidTransform(rotation, translation)
    return AlignmentSolution(transform, weighted_rms(transform, c1, c2), len(c1))


def solve_planar_4dof(c1: KeypointSet, c2: KeypointSet) -> AlignmentSolution:
    """Translation plus yaw about the optical axis (camera z).

    Yaw comes from the weighted circular regression over centered x-y
    coordinates; translation from the centroids after rotation, which
    makes the z component the weighted mean depth difference.
    """
    _check_sets(c1, c2, MIN_POINTS_4DOF)
    w = c1.weights / np.sum(c1.weights)
    centroid1 = w @ c1.points
    centroid2 = w @ c2.points
    x1 = c1.points[:, 0] - centroid1[0]
    y1 = c1.points[:, 1] - centroid1[1]
    x2 = c2.points[:, 0] - centroid2[0]
    y2 = c2.points[:, 1] - centroid2[1]
    spread1 = float(np.sum(w * (x1 * x1 + y1 * y1)))
    spread2 = float(np.sum(w * (x2 * x2 + y2 * y2)))
    if spread1 <= 1e-24 or spread2 <= 1e-24:
        raise DegenerateConfigurationError(
            "correspondences coincide in x-y; yaw is not observable"
        )
    num = float(np.sum(w * (x1 * y2 - y1 * x2)))
    den = float(np.sum(w * (x1 * x2 + y1 * y2)))
    theta = float(np.arctan2(num, den))
    rotation = rotation_about_z(theta)
    translation = centroid2 - rotation @ centroid1
    transform = RigidTransform(rotation, translation)
    return AlignmentSolution(transform, weighted_rms(transform, c1, c2), len(c1))


def solve_alignment(c1: KeypointSet, c2: KeypointSet, mode: AlignmentMode) -> AlignmentSolution:
    if mode == "4dof":
        return solve_planar_4dof(c1, c2)
    if mode == "6dof":
        return solve_rigid_6dof(c1, c2)
    raise ValueError(f"unknown alignment mode {mode!r}")


@dataclass(frozen=True)
class RansacConfig:
    """Optional robust wrapper; disabled unless requested explicitly."""

    iterations: int = 100
    inlier_threshold: float = 0.01
    min_inliers: int = 3
    seed: int = 0


def solve_with_ransac(
    c1: KeypointSet,
    c2: KeypointSet,
    mode: AlignmentMode = "6dof",
    config: RansacConfig = RansacConfig(),
) -> AlignmentSolution:
    """RANSAC over minimal samples, refit on the best consensus set.

    Falls back to the plain solver when no consensus of min_inliers forms.
    """
    minimal = MIN_POINTS_6DOF if mode == "6dof" else MIN_POINTS_4DOF
    _check_sets(c1, c2, minimal)
    n = len(c1)
    rng = np.random.default_rng(config.seed)
    best_mask: Optional[np.ndarray] = None
    best_count = 0
    for _ in range(config.iterations):
        idx = rng.choice(n, size=minimal, replace=False)
        try:
            hyp = solve_alignment(_subset(c1, idx), _subset(c2, idx), mode)
        except DegenerateConfigurationError:
            continue
        err = np.linalg.norm(hyp.transform.apply(c1.points) - c2.points, axis=1)
        mask = err < config.inlier_threshold
        count = int(np.sum(mask))
        if count > best_count:
            best_count = count
            best_mask = mask
    if best_mask is None or best_count < max(config.min_inliers, minimal):
        return solve_alignment(c1, c2, mode)
    idx = np.flatnonzero(best_mask)
    refit = solve_alignment(_subset(c1, idx), _subset(c2, idx), mode)
    return AlignmentSolution(refit.transform, refit.residual, best_count)


def _subset(c: KeypointSet, idx: np.ndarray) -> KeypointSet:
    return KeypointSet(c.points[idx], c.weights[idx])


@dataclass(frozen=True)
class ScenePair:
    """A rendered observation pair with the known relative camera transform
    (mapping frame-a coordinates onto frame-b coordinates)."""

    features_a: FeatureBundle
    depth_a: np.ndarray
    features_b: FeatureBundle
    depth_b: np.ndarray
    intrinsics: CameraIntrinsics
    true_transform: RigidTransform


@dataclass(frozen=True)
class ErrorStats:
    count: int
    mean_translation: float
    median_translation: float
    mean_rotation_deg: float
    median_rotation_deg: float

    @staticmethod
    def empty() -> "ErrorStats":
        return ErrorStats(0, float("nan"), float("nan"), float("nan"), float("nan"))


def alignment_benchmark(
    scene_pairs: Sequence[ScenePair],
    mode: AlignmentMode,
    match_config: MatchConfig = MatchConfig(),
) -> ErrorStats:
    """Match, back-project, and solve each pair; report translation and
    rotation error statistics against the known transforms."""
    trans_errors, rot_errors = [], []
    for pair in scene_pairs:
        matches = best_buddies(pair.features_a, pair.features_b, match_config)
        c1, c2 = back_project(matches, pair.depth_a, pair.depth_b, pair.intrinsics)
        solution = solve_alignment(c1, c2, mode)
        trans_errors.append(
            float(
                np.linalg.norm(
                    solution.transform.translation - pair.true_transform.translation
                )
            )
        )
        rot_errors.append(
            rotation_error_deg(
                solution.transform.rotation, pair.true_transform.rotation
            )
        )
    if not trans_errors:
        return ErrorStats.empty()
    return ErrorStats(
        count=len(trans_errors),
        mean_translation=float(np.mean(trans_errors)),
        median_translation=float(np.median(trans_errors)),
        mean_rotation_deg=float(np.mean(rot_errors)),
        median_rotation_deg=float(np.median(rot_errors)),
    )
