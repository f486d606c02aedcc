"""Core data model: observations, feature bundles, trajectories, and the
demonstration memory buffer.

Value objects validate their invariants at construction and are immutable
(arrays are copied and write-locked). The buffer is the single mutable
container; writers are expected to be single-threaded.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import DuplicateIdError, InvalidRecordError
from .geometry import Twist

DEFAULT_DT = 0.05
DEFAULT_CLS_DIM = 768
DEFAULT_DESCRIPTOR_DIM = 384
DEFAULT_IMAGE_SIZE = 224

# twist magnitude caps applied when a trajectory is recorded
MAX_LINEAR_SPEED = 1.0
MAX_ANGULAR_SPEED = 1.0


class GripperAction(IntEnum):
    NONE = 0
    OPEN = 1
    CLOSE = 2


def normalize_task(task: str) -> str:
    """Task names are compared case-insensitively as lowercase ASCII."""
    if not isinstance(task, str):
        raise InvalidRecordError("task", "task name must be a string")
    name = task.strip().lower()
    if not name:
        raise InvalidRecordError("task", "task name is empty")
    if not name.isascii():
        raise InvalidRecordError("task", "task name must be ASCII")
    return name


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole parameters in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        for name in ("fx", "fy", "cx", "cy"):
            v = getattr(self, name)
            if not np.isfinite(v):
                raise InvalidRecordError(f"intrinsics.{name}", "must be finite")
        if self.fx <= 0 or self.fy <= 0:
            raise InvalidRecordError("intrinsics.fx", "focal lengths must be positive")

    def check_principal_point(self, width: int, height: int) -> None:
        if not (0 <= self.cx < width):
            raise InvalidRecordError("intrinsics.cx", f"outside image width {width}")
        if not (0 <= self.cy < height):
            raise InvalidRecordError("intrinsics.cy", f"outside image height {height}")


@dataclass(frozen=True)
class RgbdImage:
    """An RGB-D observation; depth is in meters, 0 or NaN marking invalid pixels."""

    rgb: np.ndarray
    depth: np.ndarray

    def __post_init__(self):
        rgb = np.asarray(self.rgb)
        if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.dtype != np.uint8:
            raise InvalidRecordError("rgb", "expected H x W x 3 uint8")
        depth = np.asarray(self.depth, dtype=np.float64)
        if depth.shape != rgb.shape[:2]:
            raise InvalidRecordError("depth", "depth shape must match rgb")
        finite = np.isfinite(depth)
        if np.any(depth[finite] < 0):
            raise InvalidRecordError("depth", "finite depths must be >= 0 (0 = invalid)")
        rgb = rgb.copy()
        depth = depth.copy()
        rgb.setflags(write=False)
        depth.setflags(write=False)
        object.__setattr__(self, "rgb", rgb)
        object.__setattr__(self, "depth", depth)

    @property
    def height(self) -> int:
        return self.rgb.shape[0]

    @property
    def width(self) -> int:
        return self.rgb.shape[1]

    def valid_depth_mask(self) -> np.ndarray:
        return np.isfinite(self.depth) & (self.depth > 0)


@dataclass(frozen=True)
class FeatureBundle:
    """Extracted features for one observation: a global CLS vector plus a
    square grid of per-patch descriptors.

    ``patch_stride`` is the pixel step between adjacent grid cells and
    ``image_size`` the (height, width) of the source image, so pixel
    positions of cells can be reconstructed downstream.
    """

    cls: np.ndarray
    patches: np.ndarray
    patch_stride: int
    image_size: tuple[int, int]

    def __post_init__(self):
        cls = np.asarray(self.cls, dtype=np.float32).reshape(-1)
        if cls.size == 0 or not np.all(np.isfinite(cls)):
            raise InvalidRecordError("cls", "CLS vector must be non-empty and finite")
        if float(np.linalg.norm(cls)) == 0.0:
            raise InvalidRecordError("cls", "CLS vector has zero norm")
        patches = np.asarray(self.patches, dtype=np.float32)
        if patches.ndim != 3 or patches.shape[0] != patches.shape[1]:
            raise InvalidRecordError("patches", "expected P x P x D descriptor grid")
        if patches.shape[0] < 1:
            raise InvalidRecordError("patches", "grid must be non-empty")
        if not np.all(np.isfinite(patches)):
            raise InvalidRecordError("patches", "descriptors must be finite")
        norms = np.linalg.norm(patches.reshape(-1, patches.shape[2]), axis=1)
        if np.any(norms == 0.0):
            raise InvalidRecordError("patches", "every patch descriptor needs nonzero norm")
        stride = int(self.patch_stride)
        if stride < 1:
            raise InvalidRecordError("patch_stride", "must be >= 1")
        h, w = (int(self.image_size[0]), int(self.image_size[1]))
        if h < 1 or w < 1:
            raise InvalidRecordError("image_size", "must be positive")
        if patches.shape[0] * stride > min(h, w) + stride:
            raise InvalidRecordError(
                "patches", "grid extent exceeds image size by more than one stride"
            )
        cls = cls.copy()
        patches = patches.copy()
        cls.setflags(write=False)
        patches.setflags(write=False)
        object.__setattr__(self, "cls", cls)
        object.__setattr__(self, "patches", patches)
        object.__setattr__(self, "patch_stride", stride)
        object.__setattr__(self, "image_size", (h, w))

    @property
    def grid_size(self) -> int:
        return self.patches.shape[0]

    @property
    def cls_dim(self) -> int:
        return self.cls.shape[0]

    @property
    def descriptor_dim(self) -> int:
        return self.patches.shape[2]


@dataclass(frozen=True)
class Trajectory:
    """A recorded end-effector velocity profile sampled at fixed dt.

    ``twists`` is (T, 6) float32 rows [vx, vy, vz, wx, wy, wz] in the EE
    body frame. ``gripper`` optionally tags steps with open/close events,
    replayed verbatim. Speed caps are enforced here, at record time.
    """

    twists: np.ndarray
    dt: float = DEFAULT_DT
    gripper: Optional[np.ndarray] = None

    def __post_init__(self):
        rows = np.asarray(self.twists, dtype=np.float32)
        if rows.ndim != 2 or rows.shape[1] != 6:
            raise InvalidRecordError("trajectory.twists", "expected (T, 6) array")
        if rows.shape[0] == 0:
            raise InvalidRecordError("trajectory.twists", "trajectory is empty")
        if not np.all(np.isfinite(rows)):
            raise InvalidRecordError("trajectory.twists", "twists must be finite")
        lin = np.linalg.norm(rows[:, :3].astype(np.float64), axis=1)
        ang = np.linalg.norm(rows[:, 3:].astype(np.float64), axis=1)
        if np.any(lin > MAX_LINEAR_SPEED * (1 + 1e-6)):
            raise InvalidRecordError(
                "trajectory.twists", f"linear speed exceeds {MAX_LINEAR_SPEED} m/s"
            )
        if np.any(ang > MAX_ANGULAR_SPEED * (1 + 1e-6)):
            raise InvalidRecordError(
                "trajectory.twists", f"angular speed exceeds {MAX_ANGULAR_SPEED} rad/s"
            )
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise InvalidRecordError("trajectory.dt", "dt must be positive and finite")
        gripper = self.gripper
        if gripper is not None:
            gripper = np.asarray(gripper, dtype=np.int8)
            if gripper.shape != (rows.shape[0],):
                raise InvalidRecordError("trajectory.gripper", "one flag per step required")
            if not np.all(np.isin(gripper, [a.value for a in GripperAction])):
                raise InvalidRecordError("trajectory.gripper", "unknown gripper action")
            gripper = gripper.copy()
            gripper.setflags(write=False)
        rows = rows.copy()
        rows.setflags(write=False)
        object.__setattr__(self, "twists", rows)
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "gripper", gripper)

    @staticmethod
    def from_twists(
        twists: Sequence[Twist], dt: float = DEFAULT_DT, gripper=None
    ) -> "Trajectory":
        rows = np.stack([t.as_array() for t in twists]).astype(np.float32)
        return Trajectory(rows, dt, gripper)

    def __len__(self) -> int:
        return self.twists.shape[0]

    def steps(self) -> Iterator[tuple[Twist, GripperAction]]:
        for i, row in enumerate(self.twists):
            action = (
                GripperAction(int(self.gripper[i]))
                if self.gripper is not None
                else GripperAction.NONE
            )
            yield Twist(row[:3].astype(np.float64), row[3:].astype(np.float64)), action


@dataclass(frozen=True)
class DemonstrationRecord:
    """One demonstration: the bottleneck observation, its features, and the
    velocity trajectory recorded from the bottleneck onward."""

    record_id: str
    task: str
    bottleneck_obs: RgbdImage
    bottleneck_features: FeatureBundle
    trajectory: Trajectory
    intrinsics: CameraIntrinsics
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.record_id or not isinstance(self.record_id, str):
            raise InvalidRecordError("record_id", "must be a non-empty string")
        object.__setattr__(self, "task", normalize_task(self.task))
        obs = self.bottleneck_obs
        feats = self.bottleneck_features
        if feats.image_size != (obs.height, obs.width):
            raise InvalidRecordError(
                "bottleneck_features.image_size",
                f"{feats.image_size} does not match observation "
                f"{(obs.height, obs.width)}",
            )
        self.intrinsics.check_principal_point(obs.width, obs.height)
        meta = dict(self.metadata)
        for k, v in meta.items():
            if not isinstance(k, str) or not isinstance(v, str):
                raise InvalidRecordError("metadata", "keys and values must be strings")
        object.__setattr__(self, "metadata", meta)


class MemoryBuffer:
    """In-memory demonstration store with a task index.

    Records are immutable once added; ids are unique; iteration order is
    insertion order.
    """

    def __init__(self):
        self._records: dict[str, DemonstrationRecord] = {}
        self._by_task: dict[str, list[str]] = {}

    def __len__(self) -> int:
        return len(self._records)

    def __contains__(self, record_id: str) -> bool:
        return record_id in self._records

    def ids(self) -> list[str]:
        return list(self._records.keys())

    def tasks(self) -> list[str]:
        return sorted(self._by_task.keys())

    def get(self, record_id: str) -> DemonstrationRecord:
        try:
            return self._records[record_id]
        except KeyError:
            raise InvalidRecordError("record_id", f"unknown record {record_id!r}") from None

    def records(self) -> list[DemonstrationRecord]:
        return list(self._records.values())

    def add(self, record: DemonstrationRecord) -> "MemoryBuffer":
        if record.record_id in self._records:
            raise DuplicateIdError(f"record id {record.record_id!r} already present")
        self._records[record.record_id] = record
        self._by_task.setdefault(record.task, []).append(record.record_id)
        return self

    def task_subset(self, task: str) -> list[DemonstrationRecord]:
        name = normalize_task(task)
        return [self._records[rid] for rid in self._by_task.get(name, [])]


def add_demonstration(record: DemonstrationRecord, buffer: MemoryBuffer) -> MemoryBuffer:
    """Insert a record; rejects duplicate ids, returns the buffer."""
    return buffer.add(record)


def task_subset(buffer: MemoryBuffer, task: str) -> list[DemonstrationRecord]:
    """All demonstrations whose task matches after case normalization.
    May be empty; the set over all tasks partitions the buffer."""
    return buffer.task_subset(task)
