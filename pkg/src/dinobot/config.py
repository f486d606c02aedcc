"""Text scene configuration for the CLI: ``key = value`` pairs, one per
line, ``#`` comments, every key optional with documented defaults."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .geometry import Frame, Pose
from .matching import MatchConfig
from .model import CameraIntrinsics, MemoryBuffer, Trajectory
from .servoing import ServoConfig
from .sim import (
    DemonstrationSetup,
    NoiseModel,
    PoseRegion,
    Scene,
    SuiteConfig,
    SuiteEntry,
    SyntheticFeatureBackend,
    SyntheticObject,
    descend_trajectory,
    distractor_scene,
    make_demonstration,
    random_object,
)


@dataclass(frozen=True)
class SceneSpec:
    """Flat bag of harness knobs; field names are the config keys."""

    # object shape
    object_points: int = 24
    object_radius: float = 0.05
    object_height: float = 0.03
    planar: bool = True
    class_label: str = "mug"
    object_seed: int = 7
    # sensor noise
    descriptor_noise: float = 0.0
    depth_noise: float = 0.002
    dropout: float = 0.01
    # rendering
    background_seed: int = 0
    far_plane: float = 2.0
    sprite_radius: int = 7
    # feature geometry
    grid: int = 32
    patch_stride: int = 7
    descriptor_dim: int = 384
    cls_dim: int = 768
    image_size: int = 224
    # camera
    fx: float = 240.0
    fy: float = 240.0
    cx: float = 112.0
    cy: float = 112.0
    # test-pose region
    region_x: float = 0.4
    region_y: float = 0.4
    yaw_range_deg: float = 45.0
    tilt_range_deg: float = 0.0
    bottleneck_height: float = 0.25
    search_height: float = 0.75
    # servo
    mode: str = "4dof"
    min_similarity: float = 0.5
    threshold: float = 0.003
    max_iterations: int = 50
    step_gain: float = 1.0
    # demo trajectory
    descend: float = 0.08
    traj_steps: int = 16
    traj_yaw_deg: float = 0.0
    # scene population
    n_distractors: int = 0
    # suite
    trials: int = 10
    task: str = "grasp"

    def __post_init__(self):
        if self.mode not in ("4dof", "6dof"):
            raise ConfigError(f"mode must be 4dof or 6dof, got {self.mode!r}")


_FIELDS = {f.name: f for f in dataclasses.fields(SceneSpec)}


def _convert(key: str, raw: str):
    kind = _FIELDS[key].type
    raw = raw.strip()
    try:
        if kind == "bool":
            low = raw.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def parse_scene_text(text: str) -> SceneSpec:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        key, raw = stripped.split("=", 1)
        key = key.strip()
        if key not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _convert(key, raw)
    return SceneSpec(**values)


def load_scene_spec(path: str) -> SceneSpec:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_scene_text(fh.read())
    except OSError as e:
        raise ConfigError(f"cannot read scene config {path}: {e}") from None


def backend_from_spec(spec: SceneSpec) -> SyntheticFeatureBackend:
    return SyntheticFeatureBackend(
        cls_dim=spec.cls_dim,
        descriptor_dim=spec.descriptor_dim,
        grid_size=spec.grid,
        patch_stride=spec.patch_stride,
        image_size=spec.image_size,
    )


def intrinsics_from_spec(spec: SceneSpec) -> CameraIntrinsics:
    return CameraIntrinsics(spec.fx, spec.fy, spec.cx, spec.cy)


def noise_from_spec(spec: SceneSpec) -> NoiseModel:
    return NoiseModel(
        descriptor_sigma=spec.descriptor_noise,
        depth_sigma=spec.depth_noise,
        dropout=spec.dropout,
    )


def object_from_spec(
    spec: SceneSpec,
    object_id: str = "demo-object",
    class_label: str | None = None,
    class_seed: int | None = None,
) -> SyntheticObject:
    return random_object(
        object_id=object_id,
        class_label=class_label if class_label is not None else spec.class_label,
        class_seed=class_seed if class_seed is not None else spec.object_seed,
        n_points=spec.object_points,
        radius=spec.object_radius,
        height=spec.object_height,
        planar=spec.planar,
    )


def origin_pose() -> Pose:
    return Pose(np.eye(3), np.zeros(3), Frame.OBJECT, Frame.WORLD)


def scene_from_spec(
    spec: SceneSpec,
    obj: SyntheticObject,
    object_pose: Pose,
    noiseless: bool = False,
    with_distractors: bool = False,
) -> Scene:
    scene = Scene(
        obj=obj,
        object_pose=object_pose,
        intrinsics=intrinsics_from_spec(spec),
        backend=backend_from_spec(spec),
        background_seed=spec.background_seed,
        noise=NoiseModel.none() if noiseless else noise_from_spec(spec),
        far_plane=spec.far_plane,
        sprite_radius=spec.sprite_radius,
    )
    if with_distractors and spec.n_distractors:
        scene = distractor_scene(scene, spec.n_distractors, seed=spec.background_seed)
    return scene


def trajectory_from_spec(spec: SceneSpec) -> Trajectory:
    return descend_trajectory(
        distance=spec.descend,
        steps=spec.traj_steps,
        yaw=float(np.radians(spec.traj_yaw_deg)),
    )


def demo_from_spec(
    spec: SceneSpec, record_id: str, task: str | None = None
) -> DemonstrationSetup:
    scene = scene_from_spec(spec, object_from_spec(spec), origin_pose())
    return make_demonstration(
        scene,
        task=task if task is not None else spec.task,
        record_id=record_id,
        trajectory=trajectory_from_spec(spec),
        bottleneck_height=spec.bottleneck_height,
    )


def region_from_spec(spec: SceneSpec, center: Pose | None = None) -> PoseRegion:
    return PoseRegion(
        center=center if center is not None else origin_pose(),
        extent_x=spec.region_x,
        extent_y=spec.region_y,
        yaw_range_deg=spec.yaw_range_deg,
        tilt_range_deg=spec.tilt_range_deg,
    )


def servo_from_spec(spec: SceneSpec) -> ServoConfig:
    return ServoConfig(
        mode=spec.mode,  # type: ignore[arg-type]
        residual_threshold=spec.threshold,
        max_iterations=spec.max_iterations,
        step_gain=spec.step_gain,
        match=MatchConfig(min_similarity=spec.min_similarity),
    )


def suite_from_spec(spec: SceneSpec, trials: int | None = None) -> SuiteConfig:
    return SuiteConfig(
        task=spec.task,
        trials=trials if trials is not None else spec.trials,
        mode=spec.mode,
        bottleneck_height=spec.bottleneck_height,
        search_height=spec.search_height,
        extent_x=spec.region_x,
        extent_y=spec.region_y,
        yaw_range_deg=spec.yaw_range_deg,
        tilt_range_deg=spec.tilt_range_deg,
        noise=noise_from_spec(spec),
        min_similarity=spec.min_similarity,
        residual_threshold=spec.threshold,
        max_iterations=spec.max_iterations,
        step_gain=spec.step_gain,
        n_distractors=spec.n_distractors,
    )


def suite_entries_from_spec(
    spec: SceneSpec, n_objects: int, seed: int
) -> tuple[list[SuiteEntry], MemoryBuffer]:
    """Fresh per-object classes, one demo each, recorded into a new buffer."""
    rng = np.random.default_rng([seed, 0x5B1E])
    entries = []
    buffer = MemoryBuffer()
    for i in range(n_objects):
        obj = object_from_spec(
            spec,
            object_id=f"object-{i}",
            class_label=f"{spec.class_label}-{i}",
            class_seed=int(rng.integers(1, 2**31)),
        )
        demo_scene = scene_from_spec(spec, obj, origin_pose())
        setup = make_demonstration(
            demo_scene,
            task=spec.task,
            record_id=f"demo-{i}",
            trajectory=trajectory_from_spec(spec),
            bottleneck_height=spec.bottleneck_height,
        )
        buffer.add(setup.record)
        entries.append(SuiteEntry(obj=obj, demo_pose=origin_pose()))
    return entries, buffer
