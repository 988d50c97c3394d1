"""Encoder registry.

Two families are available:

- ``clip-vit-b32``: a real pretrained vision-language model via
  sentence-transformers. Needs the weights to be present or downloadable.
- ``hashed-projection``: a fully deterministic stand-in (feature hashing
  for text, a fixed random projection of downsampled pixels for images)
  that requires no downloads. Useful for pipelines and tests in offline
  environments; the vectors carry no semantics.
"""
from __future__ import annotations

import hashlib
import re

import numpy as np
from PIL import Image

from .errors import ModelLoadError

_TOKEN_RE = re.compile(r"[a-z0-9]+")


class HashedProjectionEncoder:
    """Deterministic hashing encoder with a CLIP-like embedding width."""

    THUMB = 32  # images are downsampled to THUMB x THUMB RGB

    def __init__(self, dim: int = 512):
        if dim < 2:
            raise ModelLoadError("embedding width must be >= 2")
        self.model_id = "hashed-projection"
        self.dim = dim
        # fixed projection for the flattened thumbnail, seeded from the id
        seed = int.from_bytes(hashlib.sha256(self.model_id.encode()).digest()[:8],
                              "little")
        rng = np.random.default_rng(seed)
        self._pixel_proj = rng.standard_normal(
            (self.THUMB * self.THUMB * 3, dim)).astype(np.float32)

    def _token_slot(self, token: str) -> tuple[int, float]:
        digest = hashlib.sha256(token.encode()).digest()
        index = int.from_bytes(digest[:4], "little") % self.dim
        sign = 1.0 if digest[4] % 2 == 0 else -1.0
        return index, sign

    def encode_texts(self, texts: list[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim), dtype=np.float32)
        for row, text in enumerate(texts):
            for token in _TOKEN_RE.findall(text.lower()):
                index, sign = self._token_slot(token)
                out[row, index] += sign
        return out

    def encode_images(self, images: list[Image.Image]) -> np.ndarray:
        out = np.zeros((len(images), self.dim), dtype=np.float32)
        for row, image in enumerate(images):
            thumb = image.convert("RGB").resize((self.THUMB, self.THUMB))
            pixels = np.asarray(thumb, dtype=np.float32).reshape(-1) / 255.0
            out[row] = pixels @ self._pixel_proj
        return out


class ClipEncoder:
    """Pretrained ViT-B/32-family model through sentence-transformers."""

    def __init__(self, model_id: str = "clip-ViT-B-32"):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise ModelLoadError(
                "sentence-transformers is not installed; "
                "pip install 'embexport[clip]'") from exc
        try:
            self._model = SentenceTransformer(model_id)
        except Exception as exc:  # weights missing, no network, ...
            raise ModelLoadError(f"could not load {model_id!r}: {exc}") from exc
        self.model_id = model_id
        self.dim = int(self._model.get_sentence_embedding_dimension())

    def encode_texts(self, texts: list[str]) -> np.ndarray:
        return np.asarray(self._model.encode(texts, convert_to_numpy=True,
                                             show_progress_bar=False),
                          dtype=np.float32)

    def encode_images(self, images: list[Image.Image]) -> np.ndarray:
        return np.asarray(self._model.encode(images, convert_to_numpy=True,
                                             show_progress_bar=False),
                          dtype=np.float32)


def load_encoder(model_id: str):
    """Resolve a model identifier to a ready encoder."""
    if model_id == "hashed-projection":
        return HashedProjectionEncoder()
    if model_id in ("clip-vit-b32", "clip-ViT-B-32"):
        return ClipEncoder("clip-ViT-B-32")
    raise ModelLoadError(
        f"unknown model {model_id!r}; available: "
        "clip-vit-b32, hashed-projection")
