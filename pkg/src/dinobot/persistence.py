"""Binary persistence for feature bundles and demonstration buffers.

Feature interchange file (``.dfea``), little-endian throughout::

    magic   4 bytes  b"DFEA"
    u32     format version (currently 1)
    u32     D   CLS dimension
    u32     P   grid side length
    u32     Dp  patch descriptor dimension
    u32     patch stride in pixels
    u32     H image height
    u32     W image width
    f32[D]          CLS vector
    f32[P*P*Dp]     patch descriptors, row-major (row, col, channel)
    (optional) u32 length + UTF-8 JSON metadata

The trailing metadata block is absent when there is nothing to record;
readers must accept both forms byte-exactly.

Demonstration buffer: a directory holding ``manifest.json`` plus one
``<id>.demo`` blob per record::

    magic   4 bytes  b"DBUF"
    u32     format version (currently 1)
    u32     H, W, D, P, Dp, patch_stride, T, has_gripper
    f64     dt, fx, fy, cx, cy
    f32[H*W*3]      rgb (values 0..255)
    f32[H*W]        depth in meters
    f32[D]          CLS
    f32[P*P*Dp]     patch descriptors
    f32[T*6]        twists [vx, vy, vz, wx, wy, wz]
    u8[T]           gripper flags, present when has_gripper = 1

Bulk arrays are 32-bit floats: loading yields exactly the stored f32
values, so save/load round-trips are bit-exact for f32-representable
content. Depth rendered or measured at f64 precision is quantized once on
first save. Header scalars stay f64 so dt and intrinsics never drift.

Newer format versions are rejected with FormatVersionMismatch, truncated
or inconsistent blobs with CorruptRecord, OS-level failures as IoError.
"""

from __future__ import annotations

import json
import os
import re
import struct
from pathlib import Path

import numpy as np

from .errors import (
    BufferIOError,
    CorruptRecordError,
    FormatVersionMismatchError,
    InvalidRecordError,
)
from .model import (
    CameraIntrinsics,
    DemonstrationRecord,
    FeatureBundle,
    MemoryBuffer,
    RgbdImage,
    Trajectory,
)

FEATURE_MAGIC = b"DFEA"
BLOB_MAGIC = b"DBUF"
FORMAT_VERSION = 1
MANIFEST_NAME = "manifest.json"

_SAFE_ID = re.compile(r"[A-Za-z0-9][A-Za-z0-9._-]*")


def _f32_bytes(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f4").tobytes()


class _Reader:
    """Sequential cursor over a byte buffer with short-read detection."""

    def __init__(self, data: bytes, label: str):
        self.data = data
        self.pos = 0
        self.label = label

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CorruptRecordError(self.label, "file is truncated")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self.take(8))[0]

    def f32_array(self, count: int, shape) -> np.ndarray:
        raw = self.take(4 * count)
        return np.frombuffer(raw, dtype="<f4", count=count).reshape(shape).copy()

    def done(self) -> None:
        if self.pos != len(self.data):
            raise CorruptRecordError(self.label, "trailing bytes after payload")


def write_feature_bundle(bundle: FeatureBundle, path, metadata: dict | None = None) -> None:
    h, w = bundle.image_size
    parts = [
        FEATURE_MAGIC,
        struct.pack(
            "<6I",
            FORMAT_VERSION,
            bundle.cls_dim,
            bundle.grid_size,
            bundle.descriptor_dim,
            bundle.patch_stride,
            h,
        ),
        struct.pack("<I", w),
        _f32_bytes(bundle.cls),
        _f32_bytes(bundle.patches),
    ]
    if metadata:
        blob = json.dumps(metadata, sort_keys=True).encode("utf-8")
        parts.append(struct.pack("<I", len(blob)))
        parts.append(blob)
    try:
        Path(path).write_bytes(b"".join(parts))
    except OSError as e:
        raise BufferIOError(f"writing {path}: {e}") from e


def read_feature_bundle(path) -> tuple[FeatureBundle, dict]:
    label = str(path)
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise BufferIOError(f"reading {path}: {e}") from e
    r = _Reader(data, label)
    if r.take(4) != FEATURE_MAGIC:
        raise CorruptRecordError(label, "bad magic, not a feature bundle file")
    version = r.u32()
    if version > FORMAT_VERSION:
        raise FormatVersionMismatchError(
            f"{label}: format version {version} is newer than supported {FORMAT_VERSION}"
        )
    d, p, dp, stride, h, w = (r.u32() for _ in range(6))
    cls = r.f32_array(d, (d,))
    patches = r.f32_array(p * p * dp, (p, p, dp))
    metadata: dict = {}
    if r.pos < len(data):
        length = r.u32()
        try:
            metadata = json.loads(r.take(length).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise CorruptRecordError(label, f"bad metadata block: {e}") from e
        if not isinstance(metadata, dict):
            raise CorruptRecordError(label, "metadata block must be a JSON object")
    r.done()
    try:
        bundle = FeatureBundle(cls, patches, stride, (h, w))
    except InvalidRecordError as e:
        raise CorruptRecordError(label, f"invalid bundle content: {e}") from e
    return bundle, metadata


def encode_record_blob(record: DemonstrationRecord) -> bytes:
    obs, feats, traj = record.bottleneck_obs, record.bottleneck_features, record.trajectory
    k = record.intrinsics
    has_gripper = 1 if traj.gripper is not None else 0
    parts = [
        BLOB_MAGIC,
        struct.pack(
            "<9I",
            FORMAT_VERSION,
            obs.height,
            obs.width,
            feats.cls_dim,
            feats.grid_size,
            feats.descriptor_dim,
            feats.patch_stride,
            len(traj),
            has_gripper,
        ),
        struct.pack("<5d", traj.dt, k.fx, k.fy, k.cx, k.cy),
        _f32_bytes(obs.rgb),
        _f32_bytes(obs.depth),
        _f32_bytes(feats.cls),
        _f32_bytes(feats.patches),
        _f32_bytes(traj.twists),
    ]
    if has_gripper:
        parts.append(np.ascontiguousarray(traj.gripper, dtype=np.uint8).tobytes())
    return b"".join(parts)


def decode_record_blob(
    data: bytes, record_id: str, task: str, metadata: dict | None = None
) -> DemonstrationRecord:
    r = _Reader(data, record_id)
    if r.take(4) != BLOB_MAGIC:
        raise CorruptRecordError(record_id, "bad magic, not a demonstration blob")
    version = r.u32()
    if version > FORMAT_VERSION:
        raise FormatVersionMismatchError(
            f"{record_id}: format version {version} is newer than supported {FORMAT_VERSION}"
        )
    h, w, d, p, dp, stride, t, has_gripper = (r.u32() for _ in range(8))
    dt, fx, fy, cx, cy = (r.f64() for _ in range(5))
    rgb_f = r.f32_array(h * w * 3, (h, w, 3))
    depth = r.f32_array(h * w, (h, w)).astype(np.float64)
    cls = r.f32_array(d, (d,))
    patches = r.f32_array(p * p * dp, (p, p, dp))
    twists = r.f32_array(t * 6, (t, 6))
    gripper = None
    if has_gripper:
        gripper = np.frombuffer(r.take(t), dtype=np.uint8).astype(np.int8)
    r.done()
    if np.any(rgb_f < 0) or np.any(rgb_f > 255):
        raise CorruptRecordError(record_id, "rgb values outside 0..255")
    try:
        return DemonstrationRecord(
            record_id=record_id,
            task=task,
            bottleneck_obs=RgbdImage(rgb_f.astype(np.uint8), depth),
            bottleneck_features=FeatureBundle(cls, patches, stride, (h, w)),
            trajectory=Trajectory(twists, dt, gripper),
            intrinsics=CameraIntrinsics(fx, fy, cx, cy),
            metadata=metadata or {},
        )
    except InvalidRecordError as e:
        raise CorruptRecordError(record_id, f"invalid record content: {e}") from e


def load_record_blob(path, record_id: str | None = None, task: str = "unknown") -> DemonstrationRecord:
    """Read a standalone ``.demo`` blob outside any buffer directory."""
    p = Path(path)
    try:
        data = p.read_bytes()
    except OSError as e:
        raise BufferIOError(f"reading {path}: {e}") from e
    return decode_record_blob(data, record_id or p.stem, task)


def save_buffer(buffer: MemoryBuffer, dirpath) -> None:
    root = Path(dirpath)
    try:
        root.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise BufferIOError(f"creating {dirpath}: {e}") from e
    entries = []
    for record in buffer.records():
        if not _SAFE_ID.fullmatch(record.record_id):
            raise BufferIOError(
                f"record id {record.record_id!r} is not filename-safe"
            )
        filename = f"{record.record_id}.demo"
        obs, feats, traj = (
            record.bottleneck_obs,
            record.bottleneck_features,
            record.trajectory,
        )
        entries.append(
            {
                "id": record.record_id,
                "task": record.task,
                "file": filename,
                "height": obs.height,
                "width": obs.width,
                "cls_dim": feats.cls_dim,
                "grid_size": feats.grid_size,
                "descriptor_dim": feats.descriptor_dim,
                "patch_stride": feats.patch_stride,
                "trajectory_len": len(traj),
                "metadata": record.metadata,
            }
        )
        try:
            (root / filename).write_bytes(encode_record_blob(record))
        except OSError as e:
            raise BufferIOError(f"writing {filename}: {e}") from e
    manifest = {"format_version": FORMAT_VERSION, "records": entries}
    tmp = root / (MANIFEST_NAME + ".tmp")
    try:
        tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        os.replace(tmp, root / MANIFEST_NAME)
    except OSError as e:
        raise BufferIOError(f"writing manifest: {e}") from e


def load_buffer(dirpath) -> MemoryBuffer:
    root = Path(dirpath)
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.exists():
        raise BufferIOError(f"no {MANIFEST_NAME} in {dirpath}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except OSError as e:
        raise BufferIOError(f"reading manifest: {e}") from e
    except json.JSONDecodeError as e:
        raise CorruptRecordError(MANIFEST_NAME, f"manifest is not valid JSON: {e}") from e
    version = manifest.get("format_version")
    if not isinstance(version, int):
        raise CorruptRecordError(MANIFEST_NAME, "missing format_version")
    if version > FORMAT_VERSION:
        raise FormatVersionMismatchError(
            f"manifest format version {version} is newer than supported {FORMAT_VERSION}"
        )
    buffer = MemoryBuffer()
    for entry in manifest.get("records", []):
        rid = entry.get("id")
        if not isinstance(rid, str) or not rid:
            raise CorruptRecordError(MANIFEST_NAME, "record entry without id")
        try:
            data = (root / entry["file"]).read_bytes()
        except KeyError:
            raise CorruptRecordError(rid, "manifest entry without file") from None
        except OSError as e:
            raise BufferIOError(f"reading blob for {rid!r}: {e}") from e
        record = decode_record_blob(
            data, rid, entry.get("task", "unknown"), entry.get("metadata") or {}
        )
        feats = record.bottleneck_features
        declared = (
            entry.get("height"),
            entry.get("width"),
            entry.get("cls_dim"),
            entry.get("grid_size"),
            entry.get("descriptor_dim"),
            entry.get("patch_stride"),
            entry.get("trajectory_len"),
        )
        actual = (
            record.bottleneck_obs.height,
            record.bottleneck_obs.width,
            feats.cls_dim,
            feats.grid_size,
            feats.descriptor_dim,
            feats.patch_stride,
            len(record.trajectory),
        )
        if declared != actual:
            raise CorruptRecordError(rid, f"manifest dims {declared} != blob dims {actual}")
        buffer.add(record)
    return buffer
