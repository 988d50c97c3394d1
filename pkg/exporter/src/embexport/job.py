"""Export jobs: encode every input item and write one dataset file."""
from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .codec import Record, encode_dataset
from .errors import DuplicateIdError, ImageDecodeError, IoError
from .models import load_encoder

UNIT_NORM_TOL = 1e-5


@dataclass
class ExportJob:
    model_id: str
    texts: dict[str, str] = field(default_factory=dict)      # id -> string
    images: dict[str, str] = field(default_factory=dict)     # id -> file path
    output_path: str = "embeddings.mrvl"
    normalize: bool = False

    def __post_init__(self):
        overlap = set(self.texts) & set(self.images)
        if overlap:
            raise DuplicateIdError(f"ids used for both text and image: "
                                   f"{sorted(overlap)}")


def _load_image(path: str) -> Image.Image:
    try:
        with Image.open(path) as img:
            img.load()
            return img.copy()
    except FileNotFoundError as exc:
        raise ImageDecodeError(f"image not found: {path}") from exc
    except UnidentifiedImageError as exc:
        raise ImageDecodeError(f"not a decodable image: {path}") from exc


def _normalize_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix.astype(np.float64), axis=1, keepdims=True)
    if np.any(norms < 1e-30):
        raise IoError("cannot normalize a zero embedding")
    return (matrix / norms).astype(np.float32)


def run_export(job: ExportJob) -> dict:
    """Encode all items and atomically write the dataset file.

    Returns a small summary dict (model id, dim, counts, output path).
    """
    encoder = load_encoder(job.model_id)

    records: list[Record] = []
    text_ids = sorted(job.texts)
    image_ids = sorted(job.images)
    if text_ids:
        vectors = encoder.encode_texts([job.texts[i] for i in text_ids])
        if job.normalize:
            vectors = _normalize_rows(vectors)
        records += [Record(id=i, kind="text", values=v)
                    for i, v in zip(text_ids, vectors)]
    if image_ids:
        images = [_load_image(job.images[i]) for i in image_ids]
        vectors = encoder.encode_images(images)
        if job.normalize:
            vectors = _normalize_rows(vectors)
        records += [Record(id=i, kind="image", values=v)
                    for i, v in zip(image_ids, vectors)]

    metadata = {
        "model": encoder.model_id,
        "normalize": "true" if job.normalize else "false",
        "preprocessing": "RGB 32x32 thumbnail"
        if encoder.model_id == "hashed-projection" else "model default",
    }
    blob = encode_dataset(encoder.dim, records, metadata)

    out = Path(job.output_path)
    try:
        fd, tmp_name = tempfile.mkstemp(dir=out.parent or Path("."),
                                        suffix=".tmp")
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.replace(tmp_name, out)       # single atomic rename
    except OSError as exc:
        raise IoError(f"could not write {out}: {exc}") from exc

    return {"model": encoder.model_id, "dim": encoder.dim,
            "texts": len(text_ids), "images": len(image_ids),
            "output": str(out)}
