"""Comparison re-rankers built on the same sentence embeddings.

Two sentence-level baselines: a hierarchical paragraph-similarity scorer
with global normalization across candidates, and top-sentence evidence
aggregation blended with the first-stage score.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import SegmentedDocument
from .embed import EmbeddingStore
from .errors import DataError


@dataclass(frozen=True)
class SdrScore:
    doc_id: str
    paragraph_matrix: np.ndarray  # query paragraphs x doc paragraphs
    total: float


@dataclass(frozen=True)
class BirchParams:
    """Blend weight a, per-sentence weights, and the number of top
    sentences aggregated."""

    a: float = 0.0
    weights: tuple[float, ...] = (1.0, 1.0, 1.0)
    s: int = 3

    def __post_init__(self):
        if not 0.0 <= self.a <= 1.0:
            raise ValueError("a must be in [0, 1]")
        if self.s < 1:
            raise ValueError("s must be >= 1")
        if len(self.weights) != self.s:
            raise ValueError("weights length must equal s")


def _paragraph_slices(doc: SegmentedDocument, store: EmbeddingStore) -> list[np.ndarray]:
    lo, _hi = store.doc_range(doc.id)
    return [store.rows[lo + a : lo + b].astype(np.float64) for a, b in doc.paragraph_bounds]


def sdr_paragraph_matrix(query: SegmentedDocument, doc: SegmentedDocument,
                         store: EmbeddingStore) -> np.ndarray:
    """P[i, j] = mean over query-paragraph-i sentences of the max cosine
    against doc-paragraph-j sentences; empty pairs are 0."""
    q_paras = _paragraph_slices(query, store)
    d_paras = _paragraph_slices(doc, store)
    matrix = np.zeros((len(q_paras), len(d_paras)))
    for i, qp in enumerate(q_paras):
        if qp.shape[0] == 0:
            continue
        for j, dp in enumerate(d_paras):
            if dp.shape[0] == 0:
                continue
            sims = qp @ dp.T
            matrix[i, j] = sims.max(axis=1).mean()
    return matrix


def sdr_score(query: SegmentedDocument, candidates: list[SegmentedDocument],
              store: EmbeddingStore) -> list[SdrScore]:
    """Hierarchical paragraph scoring with global normalization.

    For each query-paragraph row, cell values are z-normalized across all
    candidates' matrices; a candidate's total is the mean over rows of the
    max normalized cell. Zero-variance rows normalize to 0.
    """
    if not candidates:
        raise DataError("sdr_score needs at least one candidate")
    matrices = [sdr_paragraph_matrix(query, d, store) for d in candidates]
    n_rows = len(query.paragraph_bounds)
    normalized = [m.copy() for m in matrices]
    for i in range(n_rows):
        row_cells = np.concatenate([m[i] for m in matrices if m.shape[1] > 0]) \
            if any(m.shape[1] > 0 for m in matrices) else np.zeros(0)
        mu = row_cells.mean() if row_cells.size else 0.0
        sigma = row_cells.std() if row_cells.size else 0.0
        for m in normalized:
            if m.shape[1] > 0:
                m[i] = (m[i] - mu) / sigma if sigma > 0 else 0.0
    scores = []
    for doc, m in zip(candidates, normalized):
        if n_rows == 0 or m.shape[1] == 0:
            total = 0.0
        else:
            total = float(m.max(axis=1).mean())
        scores.append(SdrScore(doc_id=doc.id, paragraph_matrix=m, total=total))
    order = {d.id: i for i, d in enumerate(candidates)}
    return sorted(scores, key=lambda s: (-s.total, order[s.doc_id]))


def birch_score(query: SegmentedDocument, candidates: list[SegmentedDocument],
                first_stage_scores: dict[str, float], store: EmbeddingStore,
                params: BirchParams = BirchParams()) -> list[tuple[str, float]]:
    """Aggregate the top-s sentence scores of each candidate.

    A sentence's score is its max cosine against any query sentence; the
    document score is a*S_doc + (1-a)*sum(w_i * S_i) with S_doc the
    min-max normalized first-stage score within the pool.
    """
    missing = [d.id for d in candidates if d.id not in first_stage_scores]
    if missing:
        raise DataError(f"missing first-stage scores for {missing}")
    q_rows = store.doc_rows(query.id).astype(np.float64)
    fs = np.array([first_stage_scores[d.id] for d in candidates])
    span = fs.max() - fs.min() if len(fs) else 0.0
    fs_norm = (fs - fs.min()) / span if span > 0 else np.zeros_like(fs)
    results = []
    for idx, doc in enumerate(candidates):
        d_rows = store.doc_rows(doc.id).astype(np.float64)
        if q_rows.shape[0] and d_rows.shape[0]:
            sent_scores = np.sort((q_rows @ d_rows.T).max(axis=0))[::-1]
        else:
            sent_scores = np.zeros(0)
        top = np.zeros(params.s)
        top[: min(params.s, sent_scores.size)] = sent_scores[: params.s]
        evidence = float(np.dot(np.asarray(params.weights), top))
        score = params.a * float(fs_norm[idx]) + (1.0 - params.a) * evidence
        results.append((doc.id, score))
    order = {d.id: i for i, d in enumerate(candidates)}
    return sorted(results, key=lambda r: (-r[1], order[r[0]]))
