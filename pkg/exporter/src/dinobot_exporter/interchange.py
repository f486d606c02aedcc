"""Writer for the feature interchange file (``.dfea``).

Layout, little-endian throughout::

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

The metadata block is omitted when there is nothing to record. JSON keys
are sorted so equal metadata always serializes to equal bytes.

Writes are atomic: the payload lands under a temporary name in the
target directory and is renamed into place, so a crashed export never
leaves a half-written bundle behind.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

MAGIC = b"DFEA"
FORMAT_VERSION = 1


def encode_bundle(
    cls_vec: np.ndarray,
    patches: np.ndarray,
    patch_stride: int,
    image_size: tuple[int, int],
    metadata: dict | None = None,
) -> bytes:
    """Serialize one feature bundle to its on-disk byte string."""
    cls_vec = np.ascontiguousarray(cls_vec, dtype="<f4").reshape(-1)
    patches = np.ascontiguousarray(patches, dtype="<f4")
    if patches.ndim != 3 or patches.shape[0] != patches.shape[1]:
        raise ValueError("patches must be a P x P x D grid")
    parts = [
        MAGIC,
        struct.pack(
            "<7I",
            FORMAT_VERSION,
            cls_vec.shape[0],
            patches.shape[0],
            patches.shape[2],
            int(patch_stride),
            int(image_size[0]),
            int(image_size[1]),
        ),
        cls_vec.tobytes(),
        patches.tobytes(),
    ]
    if metadata:
        blob = json.dumps(metadata, sort_keys=True).encode("utf-8")
        parts.append(struct.pack("<I", len(blob)))
        parts.append(blob)
    return b"".join(parts)


def write_atomic(path, payload: bytes) -> None:
    """Write ``payload`` to ``path`` via a same-directory temp file + rename."""
    target = Path(path)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=".tmp-", suffix=target.suffix)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, target)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise
