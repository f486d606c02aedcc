"""Rigid-body geometry: rotations, labeled poses, twists, and the SE(3) exponential.

Conventions used throughout the package:

* rotations are 3x3 orthonormal matrices with det +1, checked to 1e-9;
* a ``Pose`` is the transform of ``frame`` expressed in ``reference``,
  i.e. composing maps coordinates of ``frame`` into ``reference``;
* a ``Twist`` is a body-frame velocity [vx, vy, vz, wx, wy, wz] and one
  integration step of duration dt is ``T <- T @ exp(dt * twist)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InvalidRecordError

ORTHONORMALITY_TOL = 1e-9


class Frame(str, Enum):
    WORLD = "world"
    EE = "ee"
    CAMERA = "camera"
    OBJECT = "object"


def skew(v: np.ndarray) -> np.ndarray:
    """Cross-product matrix: skew(v) @ u == cross(v, u)."""
    return np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )


def rotation_exp(rotvec: np.ndarray) -> np.ndarray:
    """Rodrigues formula mapping an axis-angle vector to a rotation matrix."""
    rotvec = np.asarray(rotvec, dtype=float)
    theta = float(np.linalg.norm(rotvec))
    K = skew(rotvec)
    if theta < 1e-8:
        # second-order series keeps accuracy without dividing by theta
        return np.eye(3) + K + 0.5 * (K @ K)
    a = np.sin(theta) / theta
    b = (1.0 - np.cos(theta)) / (theta * theta)
    return np.eye(3) + a * K + b * (K @ K)


def rotation_log(rotation: np.ndarray) -> np.ndarray:
    """Inverse of rotation_exp; stable near both 0 and pi."""
    R = np.asarray(rotation, dtype=float)
    vee = 0.5 * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    sin_theta = float(np.linalg.norm(vee))
    cos_theta = 0.5 * (float(np.trace(R)) - 1.0)
    theta = float(np.arctan2(sin_theta, cos_theta))
    if theta < 1e-8:
        return vee * (1.0 + theta * theta / 6.0)
    if np.pi - theta < 1e-6:
        # axis from the dominant diagonal of (R + I) / 2
        A = 0.5 * (R + np.eye(3))
        k = int(np.argmax(np.diag(A)))
        axis = A[:, k] / np.sqrt(max(A[k, k], 1e-300))
        axis /= np.linalg.norm(axis)
        if np.dot(axis, vee) < 0:
            axis = -axis
        return theta * axis
    return vee * (theta / sin_theta)


def rotation_angle(rotation: np.ndarray) -> float:
    """Rotation magnitude in radians, resolving angles well below 1e-9."""
    R = np.asarray(rotation, dtype=float)
    sin_theta = 0.5 * float(
        np.linalg.norm(
            [R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]]
        )
    )
    cos_theta = 0.5 * (float(np.trace(R)) - 1.0)
    return float(np.arctan2(sin_theta, cos_theta))


def rotation_error_deg(a: np.ndarray, b: np.ndarray) -> float:
    """Geodesic angle between two rotations, in degrees."""
    return float(np.degrees(rotation_angle(np.asarray(a) @ np.asarray(b).T)))


def rotation_about_z(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _validated_rotation(rotation, what: str) -> np.ndarray:
    R = np.array(rotation, dtype=float)
    if R.shape != (3, 3):
        raise InvalidRecordError(what, f"expected 3x3 rotation, got shape {R.shape}")
    if not np.all(np.isfinite(R)):
        raise InvalidRecordError(what, "rotation has non-finite entries")
    if np.max(np.abs(R.T @ R - np.eye(3))) > ORTHONORMALITY_TOL:
        raise InvalidRecordError(what, "rotation is not orthonormal within 1e-9")
    if abs(float(np.linalg.det(R)) - 1.0) > ORTHONORMALITY_TOL:
        raise InvalidRecordError(what, "rotation determinant is not +1 within 1e-9")
    R.setflags(write=False)
    return R


def _validated_vector(v, n: int, what: str) -> np.ndarray:
    out = np.array(v, dtype=float).reshape(-1)
    if out.shape != (n,):
        raise InvalidRecordError(what, f"expected length {n}, got shape {np.shape(v)}")
    if not np.all(np.isfinite(out)):
        raise InvalidRecordError(what, "non-finite entries")
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class RigidTransform:
    """Unlabeled rigid motion p -> rotation @ p + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "rotation", _validated_rotation(self.rotation, "transform.rotation")
        )
        object.__setattr__(
            self,
            "translation",
            _validated_vector(self.translation, 3, "transform.translation"),
        )

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform(np.eye(3), np.zeros(3))

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """Return self applied after other: (self @ other)(p) = self(other(p))."""
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        return self.compose(other)

    def inverse(self) -> "RigidTransform":
        rot_t = self.rotation.T
        return RigidTransform(rot_t, -(rot_t @ self.translation))

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return pts @ self.rotation.T + self.translation

    def scaled(self, gain: float) -> "RigidTransform":
        """Fractional motion: translation scaled linearly, rotation by
        scaling its axis-angle magnitude."""
        return RigidTransform(
            rotation_exp(gain * rotation_log(self.rotation)),
            gain * self.translation,
        )


@dataclass(frozen=True)
class Pose:
    """A frame-labeled rigid transform: ``frame`` expressed in ``reference``."""

    rotation: np.ndarray
    translation: np.ndarray
    frame: Frame
    reference: Frame

    def __post_init__(self):
        object.__setattr__(
            self, "rotation", _validated_rotation(self.rotation, "pose.rotation")
        )
        object.__setattr__(
            self,
            "translation",
            _validated_vector(self.translation, 3, "pose.translation"),
        )

    @staticmethod
    def from_transform(t: RigidTransform, frame: Frame, reference: Frame) -> "Pose":
        return Pose(t.rotation, t.translation, frame, reference)

    def as_transform(self) -> RigidTransform:
        return RigidTransform(self.rotation, self.translation)

    def compose(self, other: "Pose") -> "Pose":
        """Chain frames: (A in W).compose(B in A) -> B in W."""
        if other.reference != self.frame:
            raise ValueError(
                f"cannot compose: inner pose is expressed in {other.reference.value!r}, "
                f"outer frame is {self.frame.value!r}"
            )
        return Pose(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
            other.frame,
            self.reference,
        )

    def inverse(self) -> "Pose":
        rot_t = self.rotation.T
        return Pose(rot_t, -(rot_t @ self.translation), self.reference, self.frame)

    def transform_points(self, points: np.ndarray) -> np.ndarray:
        """Map coordinates given in ``frame`` to coordinates in ``reference``."""
        return self.as_transform().apply(points)


@dataclass(frozen=True)
class Twist:
    """Body-frame velocity: linear [m/s] and angular [rad/s] parts."""

    linear: np.ndarray
    angular: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "linear", _validated_vector(self.linear, 3, "twist.linear")
        )
        object.__setattr__(
            self, "angular", _validated_vector(self.angular, 3, "twist.angular")
        )

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.linear, self.angular])

    @staticmethod
    def from_array(xi: np.ndarray) -> "Twist":
        xi = np.asarray(xi, dtype=float).reshape(-1)
        if xi.shape != (6,):
            raise InvalidRecordError("twist", f"expected 6 entries, got {xi.shape}")
        return Twist(xi[:3], xi[3:])


def se3_exp(twist, dt: float = 1.0) -> RigidTransform:
    """Exponential of a scaled twist: the rigid motion of moving for ``dt``
    seconds at constant body velocity.

    Uses R = exp(skew(w*dt)) and p = V(w*dt) @ (v*dt) with the standard
    V matrix; series expansions below theta = 1e-6 avoid 0/0.
    """
    xi = twist.as_array() if isinstance(twist, Twist) else np.asarray(twist, dtype=float)
    u = dt * xi[:3]
    w = dt * xi[3:]
    theta = float(np.linalg.norm(w))
    K = skew(w)
    K2 = K @ K
    if theta < 1e-6:
        a = 0.5 - theta * theta / 24.0
        b = 1.0 / 6.0 - theta * theta / 120.0
    else:
        a = (1.0 - np.cos(theta)) / (theta * theta)
        b = (theta - np.sin(theta)) / (theta ** 3)
    V = np.eye(3) + a * K + b * K2
    return RigidTransform(rotation_exp(w), V @ u)
