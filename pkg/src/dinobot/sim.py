"""Synthetic desk-scale harness: seeded objects, point-sprite rendering,
and closed-loop trial suites.

Objects are sparse surface point clouds. Each point owns a descriptor seed
that maps deterministically to a unit descriptor vector, so visible-point
descriptors do not depend on object pose and matching is exactly
pose-equivariant when noise is off. Rendering projects points through the
pinhole model, splats depth as square point sprites with nearest-depth-wins
occlusion, fills every unoccupied patch cell with a background descriptor
seeded per render (repeatable at a fixed camera pose, uncorrelated across
poses), and applies the noise model last.

World convention: the table is the z = 0 plane, cameras look down along
world -z. All randomness flows from explicit seeds; two runs of any
function here with the same arguments produce identical bytes.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .alignment import ScenePair
from .errors import InvalidRecordError, PoseOverlapError
from .geometry import (
    Frame,
    Pose,
    RigidTransform,
    rotation_about_z,
    rotation_error_deg,
    rotation_exp,
    se3_exp,
)
from .matching import MatchConfig
from .model import (
    CameraIntrinsics,
    DemonstrationRecord,
    FeatureBundle,
    GripperAction,
    MemoryBuffer,
    RgbdImage,
    Trajectory,
    DEFAULT_CLS_DIM,
    DEFAULT_DESCRIPTOR_DIM,
    DEFAULT_DT,
    DEFAULT_IMAGE_SIZE,
)
from .servoing import (
    AlignmentGoal,
    ExecuteConfig,
    Observation,
    ServoConfig,
    TaskOutcome,
    execute_task,
    integrate_trajectory,
    pose_error,
)

DEFAULT_GRID = 32
DEFAULT_PATCH_STRIDE = 7
DEFAULT_FOCAL = 240.0
DEFAULT_FAR_PLANE = 2.0
DEFAULT_SPRITE_RADIUS = 7
DEFAULT_NEAR_PLANE = 0.02
DEFAULT_BOTTLENECK_HEIGHT = 0.25
DEFAULT_SEARCH_HEIGHT = 0.75


def default_intrinsics(image_size: int = DEFAULT_IMAGE_SIZE) -> CameraIntrinsics:
    c = image_size / 2.0
    return CameraIntrinsics(DEFAULT_FOCAL, DEFAULT_FOCAL, c, c)


def camera_down_rotation() -> np.ndarray:
    """Camera axes for a straight-down view: x -> world x, z -> world -z."""
    return np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]])


def overhead_pose(x: float, y: float, height: float, yaw: float = 0.0,
                  frame: Frame = Frame.EE) -> Pose:
    """A pose at (x, y, height) looking straight down with the given yaw."""
    return Pose(
        rotation_about_z(yaw) @ camera_down_rotation(),
        np.array([x, y, height]),
        frame,
        Frame.WORLD,
    )


def bottleneck_offset(height: float) -> Pose:
    """B in the object frame: straight above the object origin at ``height``,
    looking down, yaw aligned with the object."""
    return Pose(
        camera_down_rotation(), np.array([0.0, 0.0, height]), Frame.EE, Frame.OBJECT
    )


@dataclass(frozen=True)
class NoiseModel:
    """Sensor imperfections, applied after rendering. Defaults model a
    consumer RGB-D camera; descriptor noise is off by default."""

    descriptor_sigma: float = 0.0
    depth_sigma: float = 0.002
    dropout: float = 0.01

    def __post_init__(self):
        if self.descriptor_sigma < 0 or self.depth_sigma < 0 or not (0 <= self.dropout <= 1):
            raise InvalidRecordError("noise", "noise parameters must be non-negative")

    @staticmethod
    def none() -> "NoiseModel":
        return NoiseModel(0.0, 0.0, 0.0)

    @property
    def is_zero(self) -> bool:
        return self.descriptor_sigma == 0 and self.depth_sigma == 0 and self.dropout == 0


@dataclass(frozen=True)
class SyntheticObject:
    """A rigid object as surface points with per-point descriptor seeds.

    Objects of one class share descriptor seeds (and so correspond point
    to point); ``descriptor_cone`` rotates this instance's descriptors away
    from the class base vectors by up to that angle, modeling intra-class
    appearance variation.
    """

    object_id: str
    class_label: str
    points: np.ndarray
    descriptor_seeds: np.ndarray
    class_seed: int
    descriptor_cone: float = 0.0
    perturbation_seed: int = 0
    embedding_seed: int = 0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] < 1:
            raise InvalidRecordError("object.points", "expected (N, 3) with N >= 1")
        seeds = np.asarray(self.descriptor_seeds, dtype=np.uint64)
        if seeds.shape != (pts.shape[0],):
            raise InvalidRecordError("object.descriptor_seeds", "one seed per point")
        if self.descriptor_cone < 0:
            raise InvalidRecordError("object.descriptor_cone", "must be >= 0")
        pts = pts.copy()
        seeds = seeds.copy()
        pts.setflags(write=False)
        seeds.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "descriptor_seeds", seeds)

    @property
    def n_points(self) -> int:
        return self.points.shape[0]


def is_coplanar(points: np.ndarray, tol: float = 1e-9) -> bool:
    pts = np.asarray(points, dtype=np.float64)
    if pts.shape[0] < 4:
        return True
    centered = pts - pts.mean(axis=0)
    s = np.linalg.svd(centered, compute_uv=False)
    return bool(s[2] <= tol * max(s[0], 1.0))


def validate_for_mode(obj: SyntheticObject, mode: str) -> None:
    if mode == "6dof":
        if obj.n_points < 8 or is_coplanar(obj.points):
            raise InvalidRecordError(
                "object.points", "6-DOF scenes need >= 8 non-coplanar points"
            )
    else:
        if obj.n_points < 4:
            raise InvalidRecordError("object.points", "planar scenes need >= 4 points")


def class_point_seeds(class_seed: int, n_points: int) -> np.ndarray:
    """Stable per-point descriptor seeds shared by every member of a class."""
    return np.random.SeedSequence(class_seed).generate_state(n_points, dtype=np.uint64)


def random_object(
    object_id: str,
    class_label: str,
    class_seed: int,
    n_points: int = 24,
    radius: float = 0.05,
    height: float = 0.03,
    planar: bool = True,
    shape_seed: Optional[int] = None,
) -> SyntheticObject:
    """A seeded random point cloud: a disc for planar scenes, a shallow
    cylinder volume otherwise (guaranteed non-coplanar for n >= 8)."""
    rng = np.random.default_rng(shape_seed if shape_seed is not None else class_seed)
    r = radius * np.sqrt(rng.random(n_points))
    phi = rng.random(n_points) * 2 * np.pi
    z = np.zeros(n_points) if planar else rng.random(n_points) * height
    if not planar and n_points >= 8:
        # pin two points to the height extremes so the cloud never degenerates
        z[0] = 0.0
        z[1] = height
    points = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    return SyntheticObject(
        object_id=object_id,
        class_label=class_label,
        points=points,
        descriptor_seeds=class_point_seeds(class_seed, n_points),
        class_seed=class_seed,
    )


def sibling_object(
    base: SyntheticObject,
    object_id: str,
    descriptor_cone: float,
    shape_jitter: float = 0.002,
    seed: int = 1,
) -> SyntheticObject:
    """Another instance of the same class: shared descriptor seeds, jittered
    point positions, descriptors rotated inside the given cone."""
    rng = np.random.default_rng([seed, base.class_seed])
    jitter = rng.normal(0.0, shape_jitter, size=base.points.shape)
    if np.allclose(base.points[:, 2], 0.0):
        jitter[:, 2] = 0.0  # keep planar siblings planar
    return SyntheticObject(
        object_id=object_id,
        class_label=base.class_label,
        points=base.points + jitter,
        descriptor_seeds=base.descriptor_seeds,
        class_seed=base.class_seed,
        descriptor_cone=descriptor_cone,
        perturbation_seed=seed,
        embedding_seed=seed,
    )


@dataclass(frozen=True)
class SyntheticFeatureBackend:
    """Deterministic seed-to-descriptor feature source."""

    cls_dim: int = DEFAULT_CLS_DIM
    descriptor_dim: int = DEFAULT_DESCRIPTOR_DIM
    grid_size: int = DEFAULT_GRID
    patch_stride: int = DEFAULT_PATCH_STRIDE
    image_size: int = DEFAULT_IMAGE_SIZE
    intra_class_cone: float = 0.15
    view_cone: float = 0.05

    def descriptor_for_seed(self, seed: int) -> np.ndarray:
        v = np.random.default_rng(int(seed)).standard_normal(self.descriptor_dim)
        return (v / np.linalg.norm(v)).astype(np.float32)

    def point_descriptors(self, obj: SyntheticObject) -> np.ndarray:
        base = np.stack([self.descriptor_for_seed(s) for s in obj.descriptor_seeds])
        if obj.descriptor_cone == 0.0:
            return base
        rng = np.random.default_rng([obj.perturbation_seed, obj.class_seed, 0x5E5])
        out = np.empty_like(base)
        for i in range(base.shape[0]):
            angle = obj.descriptor_cone * rng.random()
            out[i] = perturb_within_cone(base[i], angle, rng)
        return out

    def class_embedding(self, class_seed: int) -> np.ndarray:
        v = np.random.default_rng([int(class_seed), 0xC7A55]).standard_normal(self.cls_dim)
        return (v / np.linalg.norm(v)).astype(np.float32)

    def object_embedding(self, obj: SyntheticObject) -> np.ndarray:
        emb = self.class_embedding(obj.class_seed)
        if self.intra_class_cone == 0.0:
            return emb
        rng = np.random.default_rng([obj.embedding_seed, obj.class_seed, 0xE3B])
        return perturb_within_cone(emb, self.intra_class_cone * rng.random(), rng)


def perturb_within_cone(v: np.ndarray, angle: float, rng: np.random.Generator) -> np.ndarray:
    """Rotate a unit vector by ``angle`` radians toward a random orthogonal
    direction; the result stays a unit vector."""
    v = np.asarray(v, dtype=np.float64)
    v = v / np.linalg.norm(v)
    g = rng.standard_normal(v.shape[0])
    w = g - np.dot(g, v) * v
    norm = np.linalg.norm(w)
    if norm == 0.0:
        return v.astype(np.float32)
    w = w / norm
    return (np.cos(angle) * v + np.sin(angle) * w).astype(np.float32)


@dataclass(frozen=True)
class Scene:
    """An immutable world state: one target object, optional distractors,
    camera intrinsics, background seed, and the sensor noise model."""

    obj: SyntheticObject
    object_pose: Pose
    intrinsics: CameraIntrinsics = field(default_factory=default_intrinsics)
    backend: SyntheticFeatureBackend = field(default_factory=SyntheticFeatureBackend)
    background_seed: int = 0
    noise: NoiseModel = field(default_factory=NoiseModel.none)
    distractors: tuple = ()
    far_plane: float = DEFAULT_FAR_PLANE
    near_plane: float = DEFAULT_NEAR_PLANE
    sprite_radius: int = DEFAULT_SPRITE_RADIUS


def _pose_entropy(pose: Pose) -> int:
    digest = hashlib.blake2b(
        pose.rotation.tobytes() + pose.translation.tobytes(), digest_size=8
    ).digest()
    return int.from_bytes(digest, "little")


def _seed_color(seed: int) -> np.ndarray:
    mixed = (int(seed) * 2654435761) & 0xFFFFFFFF
    return np.array(
        [64 + (mixed & 0x7F), 64 + ((mixed >> 8) & 0x7F), 64 + ((mixed >> 16) & 0x7F)],
        dtype=np.uint8,
    )


def render(scene: Scene, camera_pose: Pose) -> Observation:
    """Render the scene from a camera pose into an RGB-D image plus feature
    bundle.

    Sprites splat per-point depth with nearest-depth-wins; each occupied
    patch cell carries the descriptor of the in-cell point nearest the cell
    center; background cells get per-render seeded unit descriptors; the
    CLS vector blends object embeddings by visible point count; the noise
    model is applied last. Repeatable: same scene and pose, same bytes.
    """
    backend = scene.backend
    size = backend.image_size
    p = backend.grid_size
    stride = backend.patch_stride
    k = scene.intrinsics
    rng = np.random.default_rng(
        [scene.background_seed, _pose_entropy(camera_pose), 0xD1B0]
    )

    cam_inv = camera_pose.as_transform().inverse()
    bodies = [(scene.obj, scene.object_pose)] + list(scene.distractors)

    depth = np.full((size, size), scene.far_plane, dtype=np.float64)
    rgb = np.full((size, size, 3), 24, dtype=np.uint8)
    off = (size - p * stride) / 2.0

    # cell -> (distance to cell center, descriptor); nearest point wins
    best_in_cell: dict[tuple[int, int], tuple[float, np.ndarray]] = {}
    visible_counts = np.zeros(len(bodies), dtype=np.int64)

    for body_index, (obj, pose) in enumerate(bodies):
        world_pts = pose.transform_points(obj.points)
        cam_pts = cam_inv.apply(world_pts)
        descs = backend.point_descriptors(obj)
        for i in range(cam_pts.shape[0]):
            x, y, z = cam_pts[i]
            if z <= scene.near_plane:
                continue
            u = k.fx * x / z + k.cx
            v = k.fy * y / z + k.cy
            if not (0 <= u < size and 0 <= v < size):
                continue
            visible_counts[body_index] += 1
            col_px = int(round(u))
            row_px = int(round(v))
            r = scene.sprite_radius
            r0, r1 = max(row_px - r, 0), min(row_px + r + 1, size)
            c0, c1 = max(col_px - r, 0), min(col_px + r + 1, size)
            region = depth[r0:r1, c0:c1]
            closer = z < region
            region[closer] = z
            rgb[r0:r1, c0:c1][closer] = _seed_color(obj.descriptor_seeds[i])
            cell_col = math.floor((u - off) / stride)
            cell_row = math.floor((v - off) / stride)
            if 0 <= cell_col < p and 0 <= cell_row < p:
                cu = (cell_col + 0.5) * stride + off
                cv = (cell_row + 0.5) * stride + off
                dist = (u - cu) ** 2 + (v - cv) ** 2
                key = (cell_row, cell_col)
                prev = best_in_cell.get(key)
                if prev is None or dist < prev[0]:
                    best_in_cell[key] = (dist, descs[i])

    # background descriptors first so the draw order is fixed, then overlay
    patches = rng.standard_normal((p, p, backend.descriptor_dim)).astype(np.float32)
    patches /= np.linalg.norm(patches, axis=2, keepdims=True)
    for (cell_row, cell_col), (_, desc) in best_in_cell.items():
        patches[cell_row, cell_col] = desc

    weights = visible_counts.astype(np.float64)
    if weights.sum() > 0:
        cls = np.zeros(backend.cls_dim, dtype=np.float64)
        for body_index, (obj, _) in enumerate(bodies):
            if weights[body_index] == 0:
                continue
            emb = backend.object_embedding(obj).astype(np.float64)
            jitter = perturb_within_cone(emb, backend.view_cone * rng.random(), rng)
            cls += weights[body_index] * jitter.astype(np.float64)
        cls = (cls / np.linalg.norm(cls)).astype(np.float32)
    else:
        g = rng.standard_normal(backend.cls_dim)
        cls = (g / np.linalg.norm(g)).astype(np.float32)

    noise = scene.noise
    if noise.descriptor_sigma > 0:
        for (cell_row, cell_col) in best_in_cell:
            angle = abs(rng.normal(0.0, noise.descriptor_sigma))
            patches[cell_row, cell_col] = perturb_within_cone(
                patches[cell_row, cell_col], angle, rng
            )
    if noise.depth_sigma > 0:
        depth = depth + rng.normal(0.0, noise.depth_sigma, size=depth.shape)
        np.maximum(depth, 1e-6, out=depth)
    if noise.dropout > 0:
        depth[rng.random(depth.shape) < noise.dropout] = 0.0

    image = RgbdImage(rgb, depth)
    bundle = FeatureBundle(cls, patches, stride, (size, size))
    return Observation(image=image, features=bundle)


class SimEnvironment:
    """Perfect-actuation simulated robot: the camera rides the EE through an
    optional hand-eye transform, observation renders the scene at the
    current pose."""

    def __init__(
        self,
        scene: Scene,
        ee_pose: Pose,
        hand_eye: RigidTransform = RigidTransform.identity(),
    ):
        self.scene = scene
        self._ee = ee_pose
        self.hand_eye = hand_eye
        self.gripper_events: list[GripperAction] = []

    def observe(self) -> Observation:
        cam = self._ee.compose(
            Pose.from_transform(self.hand_eye, Frame.CAMERA, Frame.EE)
        )
        return render(self.scene, cam)

    def move_relative(self, motion: RigidTransform) -> None:
        self._ee = self._ee.compose(
            Pose.from_transform(motion, self._ee.frame, self._ee.frame)
        )

    def apply_twist(self, twist, dt: float) -> None:
        self.move_relative(se3_exp(twist, dt))

    def set_gripper(self, action: GripperAction) -> None:
        self.gripper_events.append(action)

    def current_ee_pose(self) -> Pose:
        return self._ee


@dataclass(frozen=True)
class DemonstrationSetup:
    """A recorded demo plus the ground truth it was recorded from."""

    record: DemonstrationRecord
    bottleneck_in_object: Pose
    bottleneck_world: Pose
    demo_object_pose: Pose


def make_demonstration(
    scene: Scene,
    task: str,
    record_id: str,
    trajectory: Trajectory,
    bottleneck_height: float = DEFAULT_BOTTLENECK_HEIGHT,
    metadata: Optional[dict] = None,
) -> DemonstrationSetup:
    """Record a demo: render the bottleneck observation from straight above
    the scene object and attach the given post-bottleneck trajectory."""
    b_object = bottleneck_offset(bottleneck_height)
    b_world = scene.object_pose.compose(b_object)
    obs = render(scene, b_world)
    meta = {"class": scene.obj.class_label}
    if metadata:
        meta.update(metadata)
    record = DemonstrationRecord(
        record_id=record_id,
        task=task,
        bottleneck_obs=obs.image,
        bottleneck_features=obs.features,
        trajectory=trajectory,
        intrinsics=scene.intrinsics,
        metadata=meta,
    )
    return DemonstrationSetup(
        record=record,
        bottleneck_in_object=b_object,
        bottleneck_world=b_world,
        demo_object_pose=scene.object_pose,
    )


def descend_trajectory(
    distance: float = 0.08,
    steps: int = 16,
    dt: float = DEFAULT_DT,
    yaw: float = 0.0,
    close_gripper: bool = True,
) -> Trajectory:
    """A simple grasp-like profile: constant descent (body +z is toward the
    table for a down-looking EE) with optional net yaw, gripper closing on
    the final step."""
    vz = distance / (steps * dt)
    wz = yaw / (steps * dt)
    rows = np.tile(
        np.array([0.0, 0.0, vz, 0.0, 0.0, wz], dtype=np.float32), (steps, 1)
    )
    gripper = None
    if close_gripper:
        gripper = np.zeros(steps, dtype=np.int8)
        gripper[-1] = GripperAction.CLOSE.value
    return Trajectory(rows, dt, gripper)


@dataclass(frozen=True)
class PoseRegion:
    """Test-pose distribution relative to a demo object pose."""

    center: Pose
    extent_x: float = 0.4
    extent_y: float = 0.4
    yaw_range_deg: float = 45.0
    tilt_range_deg: float = 0.0


def sample_test_pose(rng: np.random.Generator, region: PoseRegion) -> Pose:
    """Uniform translation inside the region square, uniform yaw inside the
    yaw range, optional uniform roll/pitch for 6-DOF scenes, all relative
    to the region center pose."""
    dx = (rng.random() - 0.5) * region.extent_x
    dy = (rng.random() - 0.5) * region.extent_y
    yaw = math.radians((rng.random() * 2 - 1) * region.yaw_range_deg)
    rotation = rotation_about_z(yaw)
    if region.tilt_range_deg > 0:
        roll = math.radians((rng.random() * 2 - 1) * region.tilt_range_deg)
        pitch = math.radians((rng.random() * 2 - 1) * region.tilt_range_deg)
        rotation = (
            rotation
            @ rotation_exp(np.array([0.0, pitch, 0.0]))
            @ rotation_exp(np.array([roll, 0.0, 0.0]))
        )
    return Pose(
        rotation @ region.center.rotation,
        region.center.translation + np.array([dx, dy, 0.0]),
        region.center.frame,
        region.center.reference,
    )


def distractor_scene(
    scene: Scene,
    n_distractors: int,
    seed: int = 0,
    min_separation: float = 0.14,
    max_radius: float = 0.30,
    attempts: int = 200,
) -> Scene:
    """Add distractor objects of fresh classes at non-overlapping poses.

    Placement is rejection-sampled around the target; PoseOverlap is raised
    when a distractor cannot be placed without crowding the target or the
    other distractors beyond the separation floor.
    """
    rng = np.random.default_rng([seed, 0xD157])
    target_xy = scene.object_pose.translation[:2]
    placed_xy = [target_xy]
    distractors = list(scene.distractors)
    for d in distractors:
        placed_xy.append(d[1].translation[:2])
    for i in range(n_distractors):
        pose = None
        for _ in range(attempts):
            angle = rng.random() * 2 * np.pi
            radius = min_separation + rng.random() * (max_radius - min_separation)
            xy = target_xy + radius * np.array([np.cos(angle), np.sin(angle)])
            if all(np.linalg.norm(xy - q) >= min_separation for q in placed_xy):
                pose = Pose(
                    rotation_about_z(rng.random() * 2 * np.pi),
                    np.array([xy[0], xy[1], 0.0]),
                    Frame.OBJECT,
                    Frame.WORLD,
                )
                break
        if pose is None:
            raise PoseOverlapError(
                f"could not place distractor {i + 1} of {n_distractors} "
                f"without crowding the target"
            )
        placed_xy.append(pose.translation[:2])
        obj = random_object(
            object_id=f"distractor-{len(distractors)}",
            class_label=f"distractor-{len(distractors)}",
            class_seed=int(rng.integers(1, 2**31)),
            n_points=scene.obj.n_points,
            planar=bool(np.allclose(scene.obj.points[:, 2], 0.0)),
        )
        distractors.append((obj, pose))
    return replace(scene, distractors=tuple(distractors))


# ---------------------------------------------------------------------------
# trial suites


@dataclass(frozen=True)
class SuiteEntry:
    obj: SyntheticObject
    demo_pose: Pose


@dataclass(frozen=True)
class SuiteConfig:
    task: str = "grasp"
    trials: int = 10
    mode: str = "4dof"
    bottleneck_height: float = DEFAULT_BOTTLENECK_HEIGHT
    search_height: float = DEFAULT_SEARCH_HEIGHT
    extent_x: float = 0.4
    extent_y: float = 0.4
    yaw_range_deg: float = 45.0
    tilt_range_deg: float = 0.0
    noise: NoiseModel = field(default_factory=NoiseModel.none)
    min_similarity: float = 0.5
    residual_threshold: float = 0.003
    max_iterations: int = 50
    step_gain: float = 1.0
    success_translation: float = 0.005
    success_rotation_deg: float = 1.0
    n_distractors: int = 0

    def servo(self) -> ServoConfig:
        return ServoConfig(
            mode=self.mode,  # type: ignore[arg-type]
            residual_threshold=self.residual_threshold,
            max_iterations=self.max_iterations,
            step_gain=self.step_gain,
            match=MatchConfig(min_similarity=self.min_similarity),
        )


@dataclass(frozen=True)
class SuiteRow:
    object_id: str
    class_label: str
    trials: int
    successes: int

    @property
    def rate(self) -> float:
        return self.successes / self.trials if self.trials else 0.0


@dataclass(frozen=True)
class SuiteResult:
    rows: tuple[SuiteRow, ...]

    @property
    def trials(self) -> int:
        return sum(r.trials for r in self.rows)

    @property
    def successes(self) -> int:
        return sum(r.successes for r in self.rows)

    @property
    def rate(self) -> float:
        return self.successes / self.trials if self.trials else 0.0

    def to_csv(self) -> str:
        lines = ["object,class,trials,successes,rate"]
        for r in self.rows:
            lines.append(
                f"{r.object_id},{r.class_label},{r.trials},{r.successes},{r.rate:.4f}"
            )
        lines.append(f"total,all,{self.trials},{self.successes},{self.rate:.4f}")
        return "\n".join(lines) + "\n"


def run_trial(
    entry: SuiteEntry,
    buffer: MemoryBuffer,
    config: SuiteConfig,
    trial_rng: np.random.Generator,
    background_seed: int,
) -> tuple[TaskOutcome, tuple[float, float], Pose]:
    """One displaced-object trial; returns the outcome, the final pose error
    relative to the demo in the object frame, and the sampled object pose."""
    region = PoseRegion(
        center=entry.demo_pose,
        extent_x=config.extent_x,
        extent_y=config.extent_y,
        yaw_range_deg=config.yaw_range_deg,
        tilt_range_deg=config.tilt_range_deg,
    )
    object_pose = sample_test_pose(trial_rng, region)
    scene = Scene(
        obj=entry.obj,
        object_pose=object_pose,
        background_seed=background_seed,
        noise=config.noise,
    )
    if config.n_distractors:
        scene = distractor_scene(scene, config.n_distractors, seed=background_seed)
    center = entry.demo_pose.translation
    start = overhead_pose(center[0], center[1], config.search_height)
    env = SimEnvironment(scene, start)
    b_object = bottleneck_offset(config.bottleneck_height)
    b_world = object_pose.compose(b_object)
    outcome = execute_task(
        env,
        config.task,
        buffer,
        ExecuteConfig(servo=config.servo()),
        true_goal_pose=b_world,
    )
    demo_final = b_object.as_transform() @ integrate_trajectory(
        outcome.retrieval.record.trajectory
    )
    actual_rel = object_pose.as_transform().inverse() @ env.current_ee_pose().as_transform()
    err = (
        float(np.linalg.norm(actual_rel.translation - demo_final.translation)),
        rotation_error_deg(actual_rel.rotation, demo_final.rotation),
    )
    return outcome, err, object_pose


def run_suite(
    buffer: MemoryBuffer,
    entries: Sequence[SuiteEntry],
    config: SuiteConfig = SuiteConfig(),
    seed: int = 0,
) -> SuiteResult:
    """Displaced-object trials for every entry: sample a test pose, run the
    full retrieve-align-replay pipeline, count a success when alignment
    converged and the final EE pose in the object frame matches the demo
    within the configured tolerance."""
    rows = []
    for obj_index, entry in enumerate(entries):
        validate_for_mode(entry.obj, config.mode)
        successes = 0
        for trial in range(config.trials):
            trial_rng = np.random.default_rng([seed, obj_index, trial])
            background_seed = int(
                np.random.default_rng([seed, obj_index, trial, 0xB6]).integers(2**31)
            )
            outcome, err, _ = run_trial(entry, buffer, config, trial_rng, background_seed)
            ok = (
                outcome.alignment.converged
                and outcome.replayed
                and err[0] <= config.success_translation
                and err[1] <= config.success_rotation_deg
            )
            if ok:
                successes += 1
        rows.append(
            SuiteRow(
                object_id=entry.obj.object_id,
                class_label=entry.obj.class_label,
                trials=config.trials,
                successes=successes,
            )
        )
    return SuiteResult(tuple(rows))


# ---------------------------------------------------------------------------
# benchmark pair generators


def make_same_object_pairs(
    n_pairs: int,
    seed: int = 0,
    max_cell_shift: int = 5,
    include_quarter_turns: bool = True,
    height: float = DEFAULT_BOTTLENECK_HEIGHT,
) -> list[ScenePair]:
    """Same-object observation pairs whose relative camera motion is an
    exact whole number of patch cells (plus optional quarter-turn yaw about
    the principal axis), over fronto-planar scenes.

    Such motions map patch centers onto patch centers, so the matched
    correspondences are exact and recovery is limited only by float
    precision; this isolates solver correctness from grid quantization.
    """
    rng = np.random.default_rng([seed, 0x5A3E])
    backend = SyntheticFeatureBackend()
    k = default_intrinsics()
    pairs = []
    for i in range(n_pairs):
        obj = random_object(
            object_id=f"same-{i}",
            class_label=f"same-{i}",
            class_seed=int(rng.integers(1, 2**31)),
            n_points=20,
            planar=True,
        )
        base_xy = (rng.random(2) - 0.5) * 0.02
        pose_a = overhead_pose(0.0, 0.0, height)
        scene = Scene(
            obj=obj,
            object_pose=Pose(
                rotation_about_z(rng.random() * 2 * np.pi),
                np.array([base_xy[0], base_xy[1], 0.0]),
                Frame.OBJECT,
                Frame.WORLD,
            ),
            backend=backend,
            intrinsics=k,
            background_seed=int(rng.integers(2**31)),
            noise=NoiseModel.none(),
        )
        kx = int(rng.integers(-max_cell_shift, max_cell_shift + 1))
        ky = int(rng.integers(-max_cell_shift, max_cell_shift + 1))
        quarter = int(rng.integers(0, 4)) if include_quarter_turns else 0
        dx = kx * backend.patch_stride * height / k.fx
        dy = ky * backend.patch_stride * height / k.fy
        delta = RigidTransform(
            rotation_about_z(quarter * np.pi / 2.0), np.array([dx, dy, 0.0])
        )
        pose_b = pose_a.compose(Pose.from_transform(delta, pose_a.frame, pose_a.frame))
        obs_a = render(scene, pose_a)
        obs_b = render(scene, pose_b)
        pairs.append(
            ScenePair(
                features_a=obs_a.features,
                depth_a=obs_a.image.depth,
                features_b=obs_b.features,
                depth_b=obs_b.image.depth,
                intrinsics=k,
                true_transform=delta.inverse(),
            )
        )
    return pairs


def make_cross_object_pairs(
    n_pairs: int,
    seed: int = 0,
    descriptor_cone: float = math.radians(20.0),
    shape_jitter: float = 0.002,
    height: float = DEFAULT_BOTTLENECK_HEIGHT,
    max_offset: float = 0.03,
    max_yaw_deg: float = 30.0,
) -> list[ScenePair]:
    """Pairs across two distinct instances of one class: shared descriptor
    seeds, descriptors rotated inside the cone, point positions jittered,
    continuous relative displacement.

    Camera A sits at instance A's bottleneck; camera B is displaced from
    instance B's bottleneck by a known perturbation D, so the transform a
    perfect correspondence solver would report is D inverse regardless of
    where instance B sits in the world. Residual errors measure
    cross-instance generalisation, not solver precision.
    """
    rng = np.random.default_rng([seed, 0xC805])
    backend = SyntheticFeatureBackend()
    k = default_intrinsics()
    pairs = []
    for i in range(n_pairs):
        base = random_object(
            object_id=f"base-{i}",
            class_label=f"class-{i}",
            class_seed=int(rng.integers(1, 2**31)),
            n_points=20,
            planar=True,
        )
        twin = sibling_object(
            base,
            object_id=f"twin-{i}",
            descriptor_cone=descriptor_cone,
            shape_jitter=shape_jitter,
            seed=int(rng.integers(1, 2**31)),
        )
        pose_a_obj = Pose(
            rotation_about_z((rng.random() * 2 - 1) * np.pi),
            np.zeros(3),
            Frame.OBJECT,
            Frame.WORLD,
        )
        dxy = (rng.random(2) - 0.5) * 0.06
        pose_b_obj = Pose(
            rotation_about_z((rng.random() * 2 - 1) * np.pi),
            np.array([dxy[0], dxy[1], 0.0]),
            Frame.OBJECT,
            Frame.WORLD,
        )
        scene_a = Scene(
            obj=base, object_pose=pose_a_obj, backend=backend, intrinsics=k,
            background_seed=int(rng.integers(2**31)), noise=NoiseModel.none(),
        )
        scene_b = Scene(
            obj=twin, object_pose=pose_b_obj, backend=backend, intrinsics=k,
            background_seed=int(rng.integers(2**31)), noise=NoiseModel.none(),
        )
        offset = (rng.random(2) - 0.5) * 2 * max_offset
        yaw = math.radians((rng.random() * 2 - 1) * max_yaw_deg)
        perturbation = RigidTransform(
            rotation_about_z(yaw), np.array([offset[0], offset[1], 0.0])
        )
        cam_a = pose_a_obj.compose(bottleneck_offset(height))
        cam_b = pose_b_obj.compose(bottleneck_offset(height)).compose(
            Pose.from_transform(perturbation, Frame.EE, Frame.EE)
        )
        obs_a = render(scene_a, Pose(cam_a.rotation, cam_a.translation, Frame.EE, Frame.WORLD))
        obs_b = render(scene_b, Pose(cam_b.rotation, cam_b.translation, Frame.EE, Frame.WORLD))
        pairs.append(
            ScenePair(
                features_a=obs_a.features,
                depth_a=obs_a.image.depth,
                features_b=obs_b.features,
                depth_b=obs_b.image.depth,
                intrinsics=k,
                true_transform=perturbation.inverse(),
            )
        )
    return pairs
