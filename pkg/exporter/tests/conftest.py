"""Shared fixtures: a deterministic five-image smoke set plus one shared export.

Four structured images and one pure-noise image, written once per
session. Source sizes are non-square so the resize path is always
exercised. The default export runs the whole set through the default
configuration with a small batch size, which forces several forward
passes including a partial final batch.
"""

import numpy as np
import pytest
from PIL import Image

from dinobot_exporter import ExporterConfig, export_images

NOISE_NAME = "noise"


def _smoke_arrays() -> dict:
    h, w = 96, 80
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float32)
    images = {}
    images["ramp"] = np.stack(
        [xx / (w - 1), yy / (h - 1), np.full_like(xx, 0.25)], axis=-1
    )
    images["checker"] = ((yy // 8 + xx // 8) % 2)[..., None] * np.array(
        [0.9, 0.6, 0.1], np.float32
    )
    images["disk"] = (((yy - h / 2) ** 2 + (xx - w / 2) ** 2) < (h / 3) ** 2)[
        ..., None
    ] * np.array([0.1, 0.8, 0.9], np.float32)
    images["stripes"] = (np.sin(xx / 4.0)[..., None] * 0.5 + 0.5) * np.array(
        [0.7, 0.2, 0.9], np.float32
    )
    rng = np.random.default_rng(2024)
    images[NOISE_NAME] = rng.random((h, w, 3), dtype=np.float32)
    return images


@pytest.fixture(scope="session")
def smoke_images(tmp_path_factory):
    """Mapping of name -> png path for the five deterministic test images."""
    root = tmp_path_factory.mktemp("images")
    paths = {}
    for name, arr in _smoke_arrays().items():
        img = Image.fromarray((np.clip(arr, 0.0, 1.0) * 255).astype(np.uint8))
        target = root / f"{name}.png"
        img.save(target)
        paths[name] = target
    return paths


@pytest.fixture(scope="session")
def default_export(smoke_images, tmp_path_factory):
    """One default-config export of the smoke set, shared across tests."""
    out_dir = tmp_path_factory.mktemp("bundles")
    config = ExporterConfig(out_dir=str(out_dir), batch_size=2)
    report = export_images(sorted(str(p) for p in smoke_images.values()), config)
    return config, report, out_dir
