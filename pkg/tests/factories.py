"""Small builders for valid package objects used across test modules."""

from __future__ import annotations

import numpy as np

from dinobot import (
    CameraIntrinsics,
    DemonstrationRecord,
    FeatureBundle,
    MemoryBuffer,
    RgbdImage,
    Trajectory,
)


def unit_rows(rng, n, dim):
    v = rng.standard_normal((n, dim))
    return (v / np.linalg.norm(v, axis=1, keepdims=True)).astype(np.float32)


def make_bundle(rng, grid=4, dim=8, cls_dim=16, stride=2, image_size=None,
                cls=None):
    if image_size is None:
        image_size = grid * stride
    if cls is None:
        cls = unit_rows(rng, 1, cls_dim)[0]
    else:
        cls = np.asarray(cls, dtype=np.float32)
    patches = unit_rows(rng, grid * grid, dim).reshape(grid, grid, dim)
    return FeatureBundle(cls, patches, stride, (image_size, image_size))


def make_image(rng, size=8, depth_scale=1.0):
    rgb = rng.integers(0, 256, (size, size, 3), dtype=np.uint8)
    depth = (rng.random((size, size)) * depth_scale + 0.1).astype(np.float32)
    return RgbdImage(rgb, depth.astype(np.float64))


def make_trajectory(rng, steps=5, dt=0.05, with_gripper=False):
    twists = (rng.random((steps, 6), dtype=np.float32) - 0.5) * 0.4
    gripper = None
    if with_gripper:
        gripper = np.zeros(steps, dtype=np.int8)
        gripper[-1] = 2
    return Trajectory(twists.astype(np.float32), dt, gripper)


def make_record(rng, record_id="demo", task="grasp", size=8, grid=4, stride=2,
                cls=None, metadata=None, with_gripper=False):
    image = make_image(rng, size)
    bundle = make_bundle(rng, grid=grid, dim=8, cls_dim=16, stride=stride,
                         image_size=size)
    if cls is not None:
        bundle = FeatureBundle(
            np.asarray(cls, dtype=np.float32), bundle.patches, stride, (size, size)
        )
    return DemonstrationRecord(
        record_id=record_id,
        task=task,
        bottleneck_obs=image,
        bottleneck_features=bundle,
        trajectory=make_trajectory(rng, with_gripper=with_gripper),
        intrinsics=CameraIntrinsics(100.0, 100.0, size / 2, size / 2),
        metadata=metadata or {},
    )


def make_buffer(rng, n=4, task="grasp"):
    buffer = MemoryBuffer()
    for i in range(n):
        buffer.add(make_record(rng, record_id=f"demo-{i:03d}", task=task))
    return buffer
