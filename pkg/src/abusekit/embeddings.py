"""Precomputed encoder outputs: ingestion, pooling, storage, remote fetch.

Audio and text encoders (wav2vec2-style, sentence-embedding-style) run
elsewhere; this module only consumes their exported matrices. A store is a
directory of raw little-endian float32 files plus an ``index.json``:

    {"modality": "audio", "dim": D, "entries": {"<id>": {"file": ..., "frames": T}}}

Pre-pooled records (frames = 1) are accepted so pooled vectors can be
exported directly.
"""

from __future__ import annotations

import base64
import json
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import RemoteFetchError, StoreError

MODALITIES = ("audio", "text")
STORE_INDEX = "index.json"


def mean_pool(matrix: np.ndarray) -> np.ndarray:
    """Arithmetic mean across the temporal (frame) dimension."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim == 1:
        matrix = matrix[None, :]
    if matrix.ndim != 2 or matrix.shape[0] < 1 or matrix.shape[1] < 1:
        raise StoreError("mean_pool expects a non-empty frames x dim matrix")
    return matrix.mean(axis=0)


@dataclass(frozen=True)
class EmbeddingRecord:
    id: str
    modality: str
    data: np.ndarray  # frames x dim, float32

    def __post_init__(self):
        if self.modality not in MODALITIES:
            raise StoreError(f"unknown modality {self.modality!r}")
        data = np.asarray(self.data, dtype=np.float32)
        if data.ndim == 1:
            data = data[None, :]
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise StoreError(f"record {self.id!r}: data must be frames x dim")
        if not np.all(np.isfinite(data)):
            raise StoreError(f"record {self.id!r} contains non-finite values")
        object.__setattr__(self, "data", data)

    @property
    def frames(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def pooled(self) -> np.ndarray:
        return mean_pool(self.data)


class EmbeddingStore:
    """Read-only view over a store directory; records are loaded lazily."""

    def __init__(self, directory: Path, modality: str, dim: int, entries: dict):
        self.directory = directory
        self.modality = modality
        self.dim = dim
        self._entries = entries

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, rid: str) -> bool:
        return rid in self._entries

    def ids(self) -> list[str]:
        return list(self._entries)

    def get(self, rid: str) -> EmbeddingRecord:
        entry = self._entries.get(rid)
        if entry is None:
            raise StoreError(f"store {self.directory}: no record with id {rid!r}")
        path = self.directory / entry["file"]
        raw = np.frombuffer(path.read_bytes(), dtype="<f4")
        frames = int(entry["frames"])
        if raw.size != frames * self.dim:
            raise StoreError(
                f"store {self.directory}: record {rid!r} has {raw.size} values, "
                f"expected {frames * self.dim}"
            )
        return EmbeddingRecord(id=rid, modality=self.modality,
                               data=raw.reshape(frames, self.dim))

    def pooled(self, rid: str) -> np.ndarray:
        return self.get(rid).pooled()


def read_store(directory: str | Path, modality: str | None = None) -> EmbeddingStore:
    """Open a store, validating the index against the files it references."""
    directory = Path(directory)
    index_path = directory / STORE_INDEX
    if not index_path.is_file():
        raise StoreError(f"store index not found: {index_path}")
    index = json.loads(index_path.read_text())
    for key in ("modality", "dim", "entries"):
        if key not in index:
            raise StoreError(f"{index_path}: missing key {key!r}")
    if modality is not None and index["modality"] != modality:
        raise StoreError(
            f"{index_path}: modality is {index['modality']!r}, expected {modality!r}"
        )
    dim = int(index["dim"])
    if dim <= 0:
        raise StoreError(f"{index_path}: dim must be positive")
    for rid, entry in index["entries"].items():
        path = directory / entry["file"]
        if not path.is_file():
            raise StoreError(f"{index_path}: entry {rid!r} references missing file {entry['file']}")
        expected = int(entry["frames"]) * dim * 4
        actual = path.stat().st_size
        if actual != expected:
            raise StoreError(
                f"{index_path}: entry {rid!r} file size {actual} != declared {expected}"
            )
    return EmbeddingStore(directory, index["modality"], dim, index["entries"])


def write_store(records: list[EmbeddingRecord], directory: str | Path) -> None:
    """Persist records; round-trip through read_store is bit-exact.

    Dim uniformity is checked before anything touches the filesystem.
    """
    if not records:
        raise StoreError("write_store needs at least one record")
    modality = records[0].modality
    dim = records[0].dim
    seen: set[str] = set()
    for rec in records:
        if rec.modality != modality:
            raise StoreError(f"mixed modalities: {modality!r} vs {rec.modality!r}")
        if rec.dim != dim:
            raise StoreError(f"record {rec.id!r} has dim {rec.dim}, expected {dim}")
        if rec.id in seen:
            raise StoreError(f"duplicate record id {rec.id!r}")
        seen.add(rec.id)
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = {}
    for rec in records:
        fname = f"{rec.id}.f32"
        tmp = directory / (fname + ".tmp")
        tmp.write_bytes(rec.data.astype("<f4").tobytes())
        tmp.replace(directory / fname)
        entries[rec.id] = {"file": fname, "frames": rec.frames}
    index = {"modality": modality, "dim": dim, "entries": entries}
    tmp = directory / (STORE_INDEX + ".tmp")
    tmp.write_text(json.dumps(index, indent=2, sort_keys=True))
    tmp.replace(directory / STORE_INDEX)


def fetch_remote(base_url: str, rid: str, modality: str,
                 timeout: float = 30.0) -> EmbeddingRecord:
    """GET one record from an embedding service.

    Wire format: JSON ``{"id", "modality", "dim", "frames", "data_b64"}`` with
    the payload base64-encoding little-endian float32 values.
    """
    url = f"{base_url.rstrip('/')}/embeddings/{modality}/{rid}"
    try:
        with urllib.request.urlopen(url, timeout=timeout) as resp:
            body = resp.read()
    except urllib.error.HTTPError as exc:
        if exc.code == 404:
            raise RemoteFetchError(f"embedding not found for id {rid!r} ({url})") from exc
        raise RemoteFetchError(f"{url}: HTTP {exc.code}") from exc
    except (urllib.error.URLError, TimeoutError, OSError) as exc:
        raise RemoteFetchError(f"{url}: {exc}") from exc
    try:
        payload = json.loads(body)
        dim = int(payload["dim"])
        frames = int(payload["frames"])
        raw = np.frombuffer(base64.b64decode(payload["data_b64"], validate=True), dtype="<f4")
    except (ValueError, KeyError, TypeError) as exc:
        raise RemoteFetchError(f"{url}: malformed response ({exc})") from exc
    if payload.get("id") != rid or payload.get("modality") != modality:
        raise RemoteFetchError(f"{url}: response id/modality does not match request")
    if raw.size != frames * dim:
        raise RemoteFetchError(
            f"{url}: payload carries {raw.size} values, expected {frames * dim}"
        )
    return EmbeddingRecord(id=rid, modality=modality, data=raw.reshape(frames, dim))
