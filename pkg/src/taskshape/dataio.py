"""Embedding dataset file format, stage manifest, and embedding-service client.

File layout (all little-endian):

    magic   "MRVL"            4 bytes
    version uint32            currently 1
    dim     uint32
    count   uint32
    entries count times:
        id_len  uint16
        id      UTF-8 bytes
        kind    uint8         0 = text, 1 = image
        values  dim float32
    meta_len uint32
    meta     UTF-8 JSON object

Vectors are stored single precision and promoted to float64 in memory.
"""
from __future__ import annotations

import json
import struct
import time
from dataclasses import dataclass, field

import numpy as np
import requests

from .errors import (
    BadMagicError,
    BadResponseError,
    DuplicateIdError,
    InvariantViolationError,
    ManifestError,
    MissingIdError,
    NetworkError,
    TruncatedError,
    UnsupportedVersionError,
)
from .stages import StageMachine, StageSpec

MAGIC = b"MRVL"
FORMAT_VERSION = 1
KIND_TEXT = "text"
KIND_IMAGE = "image"
_KIND_CODES = {KIND_TEXT: 0, KIND_IMAGE: 1}
_CODE_KINDS = {v: k for k, v in _KIND_CODES.items()}


@dataclass
class DatasetEntry:
    id: str
    kind: str
    values: np.ndarray

    def __post_init__(self):
        if self.kind not in _KIND_CODES:
            raise InvariantViolationError(f"unknown entry kind {self.kind!r}")
        self.values = np.asarray(self.values, dtype=np.float64)


@dataclass
class EmbeddingDataset:
    dim: int
    entries: list[DatasetEntry] = field(default_factory=list)
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        seen = set()
        for e in self.entries:
            if e.id in seen:
                raise DuplicateIdError(f"duplicate entry id {e.id!r}")
            seen.add(e.id)
            if e.values.size != self.dim:
                raise InvariantViolationError(
                    f"entry {e.id!r} has dim {e.values.size}, expected {self.dim}")

    def get(self, entry_id: str) -> DatasetEntry:
        for e in self.entries:
            if e.id == entry_id:
                return e
        raise KeyError(entry_id)

    def ids(self) -> set[str]:
        return {e.id for e in self.entries}


def write_dataset(ds: EmbeddingDataset, path) -> None:
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<III", FORMAT_VERSION, ds.dim, len(ds.entries))
    for e in ds.entries:
        id_bytes = e.id.encode("utf-8")
        if len(id_bytes) > 0xFFFF:
            raise InvariantViolationError(f"id too long: {e.id!r}")
        blob += struct.pack("<H", len(id_bytes))
        blob += id_bytes
        blob += struct.pack("<B", _KIND_CODES[e.kind])
        blob += np.asarray(e.values, dtype="<f4").tobytes()
    meta = json.dumps(ds.metadata, sort_keys=True).encode("utf-8")
    blob += struct.pack("<I", len(meta))
    blob += meta
    with open(path, "wb") as fh:
        fh.write(bytes(blob))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedError(
                f"needed {n} bytes at offset {self.pos}, file has {len(self.data)}")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def read_dataset(path) -> EmbeddingDataset:
    with open(path, "rb") as fh:
        rd = _Reader(fh.read())
    if rd.take(4) != MAGIC:
        raise BadMagicError("not an embedding dataset file")
    version, dim, count = rd.unpack("<III")
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(f"unsupported format version {version}")
    entries = []
    for _ in range(count):
        (id_len,) = rd.unpack("<H")
        entry_id = rd.take(id_len).decode("utf-8")
        (kind_code,) = rd.unpack("<B")
        if kind_code not in _CODE_KINDS:
            raise InvariantViolationError(f"unknown kind byte {kind_code}")
        raw = rd.take(4 * dim)
        values = np.frombuffer(raw, dtype="<f4").astype(np.float64)
        entries.append(DatasetEntry(id=entry_id, kind=_CODE_KINDS[kind_code],
                                    values=values))
    (meta_len,) = rd.unpack("<I")
    try:
        metadata = json.loads(rd.take(meta_len).decode("utf-8"))
    except json.JSONDecodeError as exc:
        raise InvariantViolationError(f"bad metadata JSON: {exc}") from exc
    if rd.pos != len(rd.data):
        raise InvariantViolationError(
            f"{len(rd.data) - rd.pos} trailing bytes after metadata")
    return EmbeddingDataset(dim=dim, entries=entries, metadata=metadata)


# ---------------------------------------------------------------------------
# stage manifest

@dataclass
class ManifestStage:
    instruction_id: str
    baseline_id: str
    start_image_id: str
    goal_image_id: str


def load_manifest(path) -> list[ManifestStage]:
    """Human-editable JSON: {"stages": [{instruction_id, baseline_id,
    start_image_id, goal_image_id}, ...]}."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "stages" not in doc:
        raise ManifestError('manifest must be an object with a "stages" list')
    stages = doc["stages"]
    if not isinstance(stages, list) or not stages:
        raise ManifestError("manifest needs at least one stage")
    keys = {"instruction_id", "baseline_id", "start_image_id", "goal_image_id"}
    out = []
    for idx, raw in enumerate(stages):
        if not isinstance(raw, dict) or set(raw) != keys:
            raise ManifestError(
                f"stage {idx} must have exactly the keys {sorted(keys)}")
        out.append(ManifestStage(**raw))
    return out


def build_stage_machine(dataset: EmbeddingDataset,
                        manifest: list[ManifestStage],
                        transition_threshold: float = 0.997,
                        patience: int = 4) -> StageMachine:
    """Resolve manifest ids against a dataset and assemble the machine."""
    specs = []
    for idx, stage in enumerate(manifest):
        try:
            specs.append(StageSpec(
                instruction_embedding=dataset.get(stage.instruction_id).values,
                baseline_embedding=dataset.get(stage.baseline_id).values,
                start_image_embedding=dataset.get(stage.start_image_id).values,
                goal_image_embedding=dataset.get(stage.goal_image_id).values))
        except KeyError as exc:
            raise ManifestError(
                f"stage {idx} references unknown id {exc.args[0]!r}") from exc
    return StageMachine(stages=specs, transition_threshold=transition_threshold,
                        patience=patience)


# ---------------------------------------------------------------------------
# remote embedding provider

MAX_BODY_BYTES = 8 * 1024 * 1024


def fetch_embeddings(endpoint: str, items: list[dict],
                     bearer_token: str | None = None,
                     attempts: int = 3, backoff: float = 0.5,
                     timeout: float = 30.0,
                     _sleep=time.sleep) -> EmbeddingDataset:
    """POST items to {endpoint}/embed and assemble the returned vectors.

    Each item is {"id": ..., "kind": "text"|"image", "text": ...} or
    {"id", "kind", "image_b64"}. Transient failures (connection errors and
    5xx) are retried with exponential backoff.
    """
    if not items:
        return EmbeddingDataset(dim=0, entries=[])
    body = json.dumps({"items": items}).encode("utf-8")
    if len(body) > MAX_BODY_BYTES:
        raise BadResponseError("request body exceeds the size cap")
    headers = {"Content-Type": "application/json"}
    if bearer_token:
        headers["Authorization"] = f"Bearer {bearer_token}"
    url = endpoint.rstrip("/") + "/embed"

    last_error: Exception | None = None
    for attempt in range(attempts):
        try:
            resp = requests.post(url, data=body, headers=headers, timeout=timeout)
            if resp.status_code >= 500:
                last_error = NetworkError(f"server error {resp.status_code}")
            elif resp.status_code != 200:
                raise BadResponseError(f"unexpected status {resp.status_code}")
            else:
                if len(resp.content) > MAX_BODY_BYTES:
                    raise BadResponseError("response exceeds the size cap")
                return _parse_response(resp.content, items)
        except (requests.ConnectionError, requests.Timeout) as exc:
            last_error = exc
        if attempt < attempts - 1:
            _sleep(backoff * (2 ** attempt))
    raise NetworkError(f"giving up after {attempts} attempts: {last_error}")


def _parse_response(content: bytes, items: list[dict]) -> EmbeddingDataset:
    try:
        doc = json.loads(content)
    except json.JSONDecodeError as exc:
        raise BadResponseError(f"response is not JSON: {exc}") from exc
    if not isinstance(doc, dict) or "dim" not in doc or "vectors" not in doc:
        raise BadResponseError('response must carry "dim" and "vectors"')
    dim = doc["dim"]
    by_id = {}
    for vec in doc["vectors"]:
        if not isinstance(vec, dict) or "id" not in vec or "values" not in vec:
            raise BadResponseError("malformed vector record")
        values = np.asarray(vec["values"], dtype=np.float64)
        if values.size != dim:
            raise BadResponseError(
                f"vector {vec['id']!r} has dim {values.size}, declared {dim}")
        by_id[vec["id"]] = values
    kinds = {item["id"]: item["kind"] for item in items}
    entries = []
    for item in items:
        if item["id"] not in by_id:
            raise MissingIdError(f"response missing id {item['id']!r}")
        entries.append(DatasetEntry(id=item["id"], kind=kinds[item["id"]],
                                    values=by_id[item["id"]]))
    return EmbeddingDataset(dim=dim, entries=entries)
