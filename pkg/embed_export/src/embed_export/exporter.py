"""Encode a segmented corpus with a sentence encoder and write it out.

Input is sentence-level JSONL, one object per line: {"doc", "sent",
"text"}. Output is the SEB1 vector container (magic "SEB1", little-endian
u32 dim, u64 row count, row-major float32) plus a JSONL manifest with one
{"doc", "sent"} object per row, mirroring the input order exactly. Rows
are L2-normalized by the encoder. Both files are written to a temp file
in the target directory and renamed into place, so readers never see a
partial store.
"""
from __future__ import annotations

import json
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"SEB1"


class ExportError(Exception):
    """Bad input lines or a model that cannot be loaded."""


@dataclass(frozen=True)
class ExportJob:
    """One export request: which model, what to encode, where to write."""

    model: str
    input_path: str | Path
    vectors_out: str | Path
    manifest_out: str | Path
    batch_size: int = 32
    device: str | None = None

    def __post_init__(self):
        if self.batch_size < 1:
            raise ExportError("batch_size must be >= 1")


def read_sentences(path: str | Path) -> tuple[list[tuple[str, int]], list[str]]:
    """Parse input JSONL into parallel (doc, sent) refs and texts."""
    refs: list[tuple[str, int]] = []
    texts: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                refs.append((str(obj["doc"]), int(obj["sent"])))
                texts.append(str(obj["text"]))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ExportError(f"{path}: bad line {lineno}: {exc}") from exc
    return refs, texts


def _load_model(job: ExportJob):
    from sentence_transformers import SentenceTransformer

    try:
        return SentenceTransformer(job.model, device=job.device)
    except Exception as exc:
        raise ExportError(f"cannot load model {job.model!r}: {exc}") from exc


def _atomic_write(path: Path, payload: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def export(job: ExportJob) -> int:
    """Run the job; returns the number of rows written."""
    refs, texts = read_sentences(job.input_path)
    model = _load_model(job)
    # renamed in newer sentence-transformers releases
    get_dim = getattr(model, "get_embedding_dimension", None) \
        or model.get_sentence_embedding_dimension
    dim = get_dim()
    if not dim:
        raise ExportError(f"model {job.model!r} reports no embedding dimension")

    chunks = []
    for start in range(0, len(texts), job.batch_size):
        batch = model.encode(
            texts[start : start + job.batch_size],
            batch_size=job.batch_size,
            convert_to_numpy=True,
            normalize_embeddings=True,
            show_progress_bar=False,
        )
        assert batch.shape[1] == dim  # dimension cannot change mid-run
        chunks.append(batch.astype("<f4"))
    vectors = np.vstack(chunks) if chunks else np.zeros((0, dim), dtype="<f4")

    header = MAGIC + struct.pack("<IQ", dim, vectors.shape[0])
    _atomic_write(Path(job.vectors_out),
                  header + np.ascontiguousarray(vectors).tobytes())
    manifest_lines = "".join(
        json.dumps({"doc": doc, "sent": sent}) + "\n" for doc, sent in refs
    )
    _atomic_write(Path(job.manifest_out), manifest_lines.encode("utf-8"))
    return vectors.shape[0]
