"""Writer for the MRVL embedding dataset format.

Layout (little-endian throughout):

    magic   "MRVL"          4 bytes
    version uint32          1
    dim     uint32
    count   uint32
    entries count times:
        id_len uint16, id UTF-8, kind uint8 (0 text / 1 image),
        values dim x float32
    meta_len uint32, meta UTF-8 JSON object
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .errors import IoError

MAGIC = b"MRVL"
VERSION = 1
KIND_CODES = {"text": 0, "image": 1}


@dataclass
class Record:
    id: str
    kind: str
    values: np.ndarray


def encode_dataset(dim: int, records: list[Record],
                   metadata: dict[str, str]) -> bytes:
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<III", VERSION, dim, len(records))
    for rec in records:
        id_bytes = rec.id.encode("utf-8")
        if len(id_bytes) > 0xFFFF:
            raise IoError(f"id too long: {rec.id!r}")
        values = np.asarray(rec.values, dtype="<f4")
        if values.size != dim:
            raise IoError(f"record {rec.id!r} has {values.size} values, "
                          f"expected {dim}")
        blob += struct.pack("<H", len(id_bytes))
        blob += id_bytes
        blob += struct.pack("<B", KIND_CODES[rec.kind])
        blob += values.tobytes()
    meta = json.dumps(metadata, sort_keys=True).encode("utf-8")
    blob += struct.pack("<I", len(meta))
    blob += meta
    return bytes(blob)
