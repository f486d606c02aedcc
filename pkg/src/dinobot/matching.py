"""Patch correspondence by mutual nearest neighbours (best buddies).

Two descriptor grids are matched under cosine similarity: a pair (i, j)
survives when j is i's nearest neighbour and i is j's nearest neighbour.
Ties resolve to the lowest linear patch index, which makes the output
deterministic for identical inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionMismatchError, IndexOutOfRangeError
from .model import FeatureBundle


@dataclass(frozen=True)
class MatchConfig:
    """min_similarity drops weak pairs (strictly below); max_pairs keeps only
    the strongest K pairs after sorting. Defaults keep everything."""

    min_similarity: float = 0.0
    max_pairs: Optional[int] = None


@dataclass(frozen=True)
class MatchPair:
    """One mutual nearest-neighbour correspondence.

    patch_* are (row, col) grid indices; pixel_* are (u, v) patch-center
    positions in image coordinates.
    """

    patch_a: tuple[int, int]
    patch_b: tuple[int, int]
    pixel_a: tuple[float, float]
    pixel_b: tuple[float, float]
    similarity: float


def patch_to_pixel(patch_index: tuple[int, int], bundle: FeatureBundle) -> tuple[float, float]:
    """Center pixel (u, v) of a grid cell, clamped inside the image.

    The grid is laid out from an offset that centers it in the image:
    offset = (extent - P * stride) / 2, which is zero whenever the grid
    tiles the image exactly.
    """
    row, col = int(patch_index[0]), int(patch_index[1])
    p = bundle.grid_size
    if not (0 <= row < p and 0 <= col < p):
        raise IndexOutOfRangeError(f"patch index {(row, col)} outside {p}x{p} grid")
    h, w = bundle.image_size
    stride = bundle.patch_stride
    off_u = (w - p * stride) / 2.0
    off_v = (h - p * stride) / 2.0
    u = (col + 0.5) * stride + off_u
    v = (row + 0.5) * stride + off_v
    return (min(max(u, 0.0), w - 1.0), min(max(v, 0.0), h - 1.0))


def _unit_rows(patches: np.ndarray) -> np.ndarray:
    # similarity is computed at f64 regardless of storage dtype, matching
    # cosine_similarity, so near-ties resolve identically everywhere
    flat = patches.reshape(-1, patches.shape[2]).astype(np.float64)
    norms = np.linalg.norm(flat, axis=1, keepdims=True)
    return flat / norms


def best_buddies(
    fa: FeatureBundle, fb: FeatureBundle, config: MatchConfig = MatchConfig()
) -> list[MatchPair]:
    """Mutual nearest-neighbour pairs between two bundles.

    Output is sorted by descending similarity (then by index a), filtered
    by min_similarity and optionally capped at max_pairs. Symmetric up to
    pair orientation: swapping the bundles transposes each pair.
    """
    if fa.descriptor_dim != fb.descriptor_dim:
        raise DimensionMismatchError(
            f"descriptor dims disagree: {fa.descriptor_dim} vs {fb.descriptor_dim}"
        )
    a = _unit_rows(fa.patches)
    b = _unit_rows(fb.patches)
    sim = a @ b.T
    np.clip(sim, -1.0, 1.0, out=sim)
    # argmax scans in index order, so the first maximum (lowest index) wins ties
    nn_ab = np.argmax(sim, axis=1)
    nn_ba = np.argmax(sim, axis=0)
    ids_a = np.arange(a.shape[0])
    mutual = nn_ba[nn_ab] == ids_a
    ia = ids_a[mutual]
    ib = nn_ab[mutual]
    sims = sim[ia, ib]
    keep = sims >= config.min_similarity
    ia, ib, sims = ia[keep], ib[keep], sims[keep]
    order = np.lexsort((ia, -sims))
    if config.max_pairs is not None:
        order = order[: max(config.max_pairs, 0)]
    pa = fa.grid_size
    pb = fb.grid_size
    pairs = []
    for k in order:
        ra, ca = divmod(int(ia[k]), pa)
        rb, cb = divmod(int(ib[k]), pb)
        pairs.append(
            MatchPair(
                patch_a=(ra, ca),
                patch_b=(rb, cb),
                pixel_a=patch_to_pixel((ra, ca), fa),
                pixel_b=patch_to_pixel((rb, cb), fb),
                similarity=float(sims[k]),
            )
        )
    return pairs
