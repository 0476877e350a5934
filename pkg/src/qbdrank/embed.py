"""Sentence embedding store: binary format, ingestion, and a stub embedder.

Vectors live on disk as float32 in a small binary container ("SEB1"
magic, little-endian u32 dim, u64 row count, then row-major values) with
a JSONL manifest mapping every row to a (doc, sentence-index) pair. Rows
are unit-normalized at load so cosine similarity reduces to a dot
product, which is the hot loop of the whole engine.
"""
from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import SegmentedDocument
from .errors import DataError

MAGIC = b"SEB1"
NORM_TOLERANCE = 1e-4


class StoreFormatError(DataError):
    """The vectors file does not match the expected binary layout."""


class CountMismatchError(DataError):
    """Manifest row count disagrees with the vectors header."""


class ZeroNormRowError(DataError):
    """A stored vector has zero L2 norm and cannot be normalized."""

    def __init__(self, row: int):
        super().__init__(f"zero-norm vector at row {row}")
        self.row = row


class MissingEmbeddingError(DataError):
    """A corpus sentence has no row in the store."""


@dataclass(frozen=True)
class SentenceRef:
    doc_id: str
    sent_idx: int


class EmbeddingStore:
    """Immutable matrix of unit-normalized sentence vectors.

    Rows of one document are contiguous and in sentence order; ``index``
    maps doc_id to its half-open row range.
    """

    def __init__(self, rows: np.ndarray, manifest: list[SentenceRef]):
        if rows.ndim != 2:
            raise StoreFormatError("rows must be a 2-D matrix")
        if len(manifest) != rows.shape[0]:
            raise CountMismatchError(
                f"manifest has {len(manifest)} rows, matrix has {rows.shape[0]}"
            )
        norms = np.linalg.norm(rows.astype(np.float64), axis=1)
        zero = np.flatnonzero(norms == 0.0)
        if zero.size:
            raise ZeroNormRowError(int(zero[0]))
        self.rows = (rows.astype(np.float64) / norms[:, None]).astype(np.float32)
        self.manifest = list(manifest)
        self.dim = int(rows.shape[1])
        self.index: dict[str, tuple[int, int]] = {}
        start = 0
        for i, ref in enumerate(self.manifest):
            if ref.doc_id not in self.index:
                self.index[ref.doc_id] = (i, i)
            lo, hi = self.index[ref.doc_id]
            if hi != i:
                raise StoreFormatError(f"rows of doc {ref.doc_id!r} are not contiguous")
            if ref.sent_idx != i - lo:
                raise StoreFormatError(
                    f"doc {ref.doc_id!r} row {i} has sent_idx {ref.sent_idx}, expected {i - lo}"
                )
            self.index[ref.doc_id] = (lo, i + 1)
            start = i + 1
        del start

    def __len__(self) -> int:
        return self.rows.shape[0]

    def doc_range(self, doc_id: str) -> tuple[int, int]:
        try:
            return self.index[doc_id]
        except KeyError:
            raise MissingEmbeddingError(f"no embeddings for doc {doc_id!r}") from None

    def doc_rows(self, doc_id: str) -> np.ndarray:
        lo, hi = self.doc_range(doc_id)
        return self.rows[lo:hi]

    def sentence_count(self, doc_id: str) -> int:
        lo, hi = self.doc_range(doc_id)
        return hi - lo


def write_store(vectors: np.ndarray, manifest: list[SentenceRef],
                vectors_path: str | Path, manifest_path: str | Path) -> None:
    """Write raw vectors and manifest in the on-disk format."""
    vectors = np.ascontiguousarray(vectors, dtype="<f4")
    with open(vectors_path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQ", vectors.shape[1], vectors.shape[0]))
        fh.write(vectors.tobytes())
    with open(manifest_path, "w", encoding="utf-8") as fh:
        for ref in manifest:
            fh.write(json.dumps({"doc": ref.doc_id, "sent": ref.sent_idx}) + "\n")


def ingest(vectors_path: str | Path, manifest_path: str | Path) -> EmbeddingStore:
    """Load and validate a vectors file + manifest pair."""
    with open(vectors_path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise StoreFormatError(f"{vectors_path}: bad magic {magic!r}")
        header = fh.read(12)
        if len(header) != 12:
            raise StoreFormatError(f"{vectors_path}: truncated header")
        dim, nrows = struct.unpack("<IQ", header)
        if dim == 0:
            raise StoreFormatError(f"{vectors_path}: dimension is zero")
        data = np.frombuffer(fh.read(), dtype="<f4")
    if data.size != dim * nrows:
        raise StoreFormatError(
            f"{vectors_path}: expected {dim * nrows} values, found {data.size}"
        )
    manifest: list[SentenceRef] = []
    with open(manifest_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                manifest.append(SentenceRef(doc_id=obj["doc"], sent_idx=int(obj["sent"])))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise StoreFormatError(f"{manifest_path}: bad line {lineno}: {exc}") from exc
    if len(manifest) != nrows:
        raise CountMismatchError(
            f"{manifest_path}: {len(manifest)} manifest rows, header says {nrows}"
        )
    return EmbeddingStore(data.reshape(nrows, dim), manifest)


def _token_vector(token: str, dim: int, seed: int,
                  cache: dict[str, np.ndarray]) -> np.ndarray:
    vec = cache.get(token)
    if vec is None:
        digest = hashlib.blake2b(f"{seed}\x00{token}".encode(), digest_size=8).digest()
        rng = np.random.default_rng(int.from_bytes(digest, "little"))
        vec = rng.standard_normal(dim)
        vec /= np.linalg.norm(vec)
        cache[token] = vec
    return vec


def stub_embed(docs: list[SegmentedDocument], dim: int, seed: int) -> EmbeddingStore:
    """Deterministic offline embedder for tests and synthetic pipelines.

    Each sentence vector is the normalized sum of hash-seeded pseudo-random
    unit vectors, one per whitespace token (bag of words): identical
    sentences map to identical rows, and the same (docs, dim, seed) call is
    bit-reproducible.
    """
    if dim < 2:
        raise ValueError("dim must be >= 2")
    cache: dict[str, np.ndarray] = {}
    rows: list[np.ndarray] = []
    manifest: list[SentenceRef] = []
    for doc in docs:
        for i, sentence in enumerate(doc.sentences):
            acc = np.zeros(dim)
            for token in sentence.split():
                acc += _token_vector(token, dim, seed, cache)
            norm = np.linalg.norm(acc)
            if norm < 1e-12:
                # degenerate cancellation; fall back to a whole-sentence hash
                acc = _token_vector("\x00sent\x00" + sentence, dim, seed, cache)
                norm = 1.0
            rows.append((acc / norm).astype(np.float32))
            manifest.append(SentenceRef(doc_id=doc.id, sent_idx=i))
    matrix = np.vstack(rows) if rows else np.zeros((0, dim), dtype=np.float32)
    return EmbeddingStore(matrix, manifest)


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Dot product of two unit-normalized vectors."""
    u = np.asarray(u)
    v = np.asarray(v)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    return float(np.dot(u.astype(np.float64), v.astype(np.float64)))
