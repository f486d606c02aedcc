"""Batch export of image features to interchange bundles.

Images run through the backbone in batches, one forward pass per batch;
each result lands as ``<image stem>.dfea`` in the output directory via
an atomic rename. Unreadable files are reported and skipped while the
rest of the batch completes, and the caller learns about partial
failure from the report. Bundle metadata records the model id, layer,
facet, and resize, so a bundle is self-describing about how it was made.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .backbone import ExporterConfig, FeatureBackbone, load_image
from .errors import UnreadableImage
from .interchange import encode_bundle, write_atomic


@dataclass
class ExportReport:
    """Outcome of one run: bundle paths written, failures as (path, message)."""

    written: list[str] = field(default_factory=list)
    failures: list[tuple[str, str]] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return not self.failures


def export_images(
    paths,
    config: ExporterConfig,
    on_error: Optional[Callable[[UnreadableImage], None]] = None,
) -> ExportReport:
    """Extract features for every readable image in ``paths``.

    ``on_error`` is called with each UnreadableImage as it is hit,
    letting a CLI stream diagnostics while the batch keeps going.
    ModelLoadFailure and ConfigError raise before any file is touched.
    """
    backbone = FeatureBackbone(config)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    metadata = {
        "model": config.model,
        "layer": config.layer,
        "facet": config.facet,
        "resize": config.resize,
    }
    report = ExportReport()
    batch_paths: list[Path] = []
    batch_pixels: list[np.ndarray] = []

    def flush() -> None:
        if not batch_paths:
            return
        cls_vecs, patch_grids = backbone.extract(np.stack(batch_pixels))
        for source, cls_vec, patches in zip(batch_paths, cls_vecs, patch_grids):
            target = out_dir / (source.stem + ".dfea")
            payload = encode_bundle(
                cls_vec,
                patches,
                backbone.patch_size,
                (config.resize, config.resize),
                metadata,
            )
            write_atomic(target, payload)
            report.written.append(str(target))
        batch_paths.clear()
        batch_pixels.clear()

    for raw in paths:
        path = Path(raw)
        try:
            pixels = load_image(path, config.resize)
        except UnreadableImage as e:
            report.failures.append((e.path, str(e)))
            if on_error is not None:
                on_error(e)
            continue
        batch_paths.append(path)
        batch_pixels.append(pixels)
        if len(batch_paths) == config.batch_size:
            flush()
    flush()
    return report
