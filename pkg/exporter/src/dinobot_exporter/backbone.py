"""Vision-transformer feature extraction.

A ``FeatureBackbone`` wraps a ViT-B/16 style encoder and turns RGB
images into one global CLS vector (the final-layer class token) plus a
square grid of per-patch descriptors drawn from a configurable facet of
a configurable encoder block:

* ``key`` / ``query`` / ``value``: that block's attention projection,
  evaluated for every patch token,
* ``token``: the block's output embeddings themselves.

Inference is deterministic: eval mode (no dropout), float32, no
gradients, and fixed preprocessing (bilinear resize to a square,
mean/std 0.5 normalization). Model identifiers of the form
``seeded:vit-b16[:N]`` build an untrained encoder from torch seed N
(default 0), so exports are repeatable with no weight files on disk;
any other identifier is resolved as a pretrained checkpoint name.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from PIL import Image

from .errors import ConfigError, ModelLoadFailure, UnreadableImage

FACETS = ("key", "query", "value", "token")

_SEEDED_PREFIX = "seeded:"
_SEEDED_ARCH = "vit-b16"
# (new-layout name, old-layout name) per facet; transformers renamed the
# attention projections and flattened the block tree in newer releases.
_PROJECTIONS = {
    "key": ("k_proj", "key"),
    "query": ("q_proj", "query"),
    "value": ("v_proj", "value"),
}


@dataclass(frozen=True)
class ExporterConfig:
    """What to run and where the results go."""

    model: str = "seeded:vit-b16"
    layer: int = 9
    facet: str = "key"
    resize: int = 224
    out_dir: str = "."
    batch_size: int = 8

    def __post_init__(self):
        if self.facet not in FACETS:
            raise ConfigError(
                f"facet must be one of {', '.join(FACETS)}, got '{self.facet}'"
            )
        if self.layer < 0:
            raise ConfigError("layer must be >= 0")
        if self.resize < 1:
            raise ConfigError("resize must be positive")
        if self.batch_size < 1:
            raise ConfigError("batch size must be >= 1")


def _build_model(model_id: str):
    from transformers import ViTConfig, ViTModel

    if model_id.startswith(_SEEDED_PREFIX):
        arch, _, seed_text = model_id[len(_SEEDED_PREFIX) :].partition(":")
        if arch != _SEEDED_ARCH:
            raise ModelLoadFailure(
                f"unknown seeded architecture '{arch}', expected '{_SEEDED_ARCH}'"
            )
        try:
            seed = int(seed_text) if seed_text else 0
        except ValueError:
            raise ModelLoadFailure(f"bad seed in model id '{model_id}'") from None
        torch.manual_seed(seed)
        return ViTModel(ViTConfig())
    try:
        return ViTModel.from_pretrained(model_id)
    except Exception as e:  # hub, cache, and file errors share no useful base
        raise ModelLoadFailure(f"cannot load '{model_id}': {e}") from e


def _encoder_blocks(model):
    blocks = getattr(model, "layers", None)
    if blocks is None:
        blocks = model.encoder.layer  # older transformers layout
    return blocks


def _projection_module(block, facet: str):
    new_name, old_name = _PROJECTIONS[facet]
    attention = block.attention
    module = getattr(attention, new_name, None)
    if module is None:
        inner = getattr(attention, "attention", attention)  # old layout nests once more
        module = getattr(inner, old_name, None)
    if module is None:
        raise ModelLoadFailure(
            f"cannot locate the {facet} projection inside an attention block"
        )
    return module


class FeatureBackbone:
    """A loaded encoder bound to one extraction configuration."""

    def __init__(self, config: ExporterConfig):
        self.config = config
        self.model = _build_model(config.model)
        self.model.eval()
        depth = int(self.model.config.num_hidden_layers)
        patch = int(self.model.config.patch_size)
        if config.layer >= depth:
            raise ConfigError(f"layer {config.layer} out of range for a {depth}-block model")
        if config.resize % patch != 0:
            raise ConfigError(
                f"resize {config.resize} is not a multiple of the {patch}px patch size"
            )
        self.patch_size = patch
        self.grid_size = config.resize // patch
        self.native_size = int(self.model.config.image_size)

    @property
    def cls_dim(self) -> int:
        return int(self.model.config.hidden_size)

    def extract(self, batch: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Run a preprocessed (N, 3, R, R) batch through the encoder.

        Returns float32 ``(cls, patches)`` with shapes (N, D) and
        (N, P, P, D).
        """
        config = self.config
        pixels = torch.from_numpy(np.ascontiguousarray(batch, dtype=np.float32))
        captured: dict[str, torch.Tensor] = {}
        handle = None
        if config.facet != "token":
            module = _projection_module(
                _encoder_blocks(self.model)[config.layer], config.facet
            )
            handle = module.register_forward_hook(
                lambda mod, inputs, out: captured.__setitem__("tokens", out)
            )
        try:
            with torch.no_grad():
                out = self.model(
                    pixel_values=pixels,
                    output_hidden_states=config.facet == "token",
                    interpolate_pos_encoding=config.resize != self.native_size,
                )
        finally:
            if handle is not None:
                handle.remove()
        cls_vec = out.last_hidden_state[:, 0, :]
        if config.facet == "token":
            # hidden_states[0] is the embedding output, so block L lands at L + 1.
            tokens = out.hidden_states[config.layer + 1]
        else:
            tokens = captured["tokens"]
        p = self.grid_size
        if tokens.shape[1] != p * p + 1:
            raise ModelLoadFailure(
                f"model produced {tokens.shape[1]} tokens where {p * p + 1} were expected"
            )
        patches = tokens[:, 1:, :].reshape(tokens.shape[0], p, p, -1)
        return (
            cls_vec.numpy().astype(np.float32, copy=True),
            patches.numpy().astype(np.float32, copy=True),
        )


_DECODE_ERRORS = (OSError, ValueError, SyntaxError)


def load_image(path, resize: int) -> np.ndarray:
    """Decode an image file into model input.

    Returns a (3, resize, resize) float32 array in [-1, 1]. Every decode
    or I/O problem surfaces as UnreadableImage so batch callers can skip
    the file and keep going.
    """
    try:
        with Image.open(path) as im:
            rgb = im.convert("RGB").resize((resize, resize), Image.Resampling.BILINEAR)
    except _DECODE_ERRORS as e:
        raise UnreadableImage(path, str(e) or type(e).__name__) from e
    arr = np.asarray(rgb, dtype=np.float32) / 255.0
    return ((arr - 0.5) / 0.5).transpose(2, 0, 1)
