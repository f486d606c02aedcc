"""Offline feature exporter: RGB images in, ``.dfea`` interchange bundles out."""

from .backbone import FACETS, ExporterConfig, FeatureBackbone, load_image
from .errors import ConfigError, ExporterError, ModelLoadFailure, UnreadableImage
from .export import ExportReport, export_images
from .interchange import FORMAT_VERSION, MAGIC, encode_bundle, write_atomic

__all__ = [
    "FACETS",
    "FORMAT_VERSION",
    "MAGIC",
    "ConfigError",
    "ExportReport",
    "ExporterConfig",
    "ExporterError",
    "FeatureBackbone",
    "ModelLoadFailure",
    "UnreadableImage",
    "encode_bundle",
    "export_images",
    "load_image",
    "write_atomic",
]
