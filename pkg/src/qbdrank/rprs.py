"""Proportional relevance scoring over sentence-neighbor sets.

For a query document, the sentences of its top-k first-stage candidates
form one flat pool. Every query sentence gets a ranked list of its top-n
most similar pool sentences; a candidate is scored by what fraction of
the query participates in those lists (query proportion) and what
fraction of the candidate does (document proportion). The frequency
variant saturates repeated matches BM25-style with k1 and normalizes by
candidate length (in sentences) with b.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import SegmentedDocument
from .embed import EmbeddingStore, MissingEmbeddingError, SentenceRef
from .errors import DataError

# Tuned parameter presets per benchmark family (n, k1, b + re-ranking depth).
PRS_PRESETS = {
    "coliee": {"n": 4, "k1": 2.8, "b": 1.0, "depth": 50},
    "wikipedia": {"n": 4, "k1": 3.0, "b": 0.9, "depth": 100},
    "clefip": {"n": 5, "k1": 2.4, "b": 0.8, "depth": 20},
}


class EmptyQueryError(DataError):
    """Scoring needs at least one query sentence."""


@dataclass(frozen=True)
class PrsParams:
    """Tunable surface of the scorer plus ablation switches.

    use_min only matters for the base (non-frequency) variant; use_qp and
    use_dp drop one of the two proportions (the dropped factor is treated
    as 1).
    """

    n: int = 4
    k1: float = 2.8
    b: float = 1.0
    use_freq: bool = True
    use_qp: bool = True
    use_dp: bool = True
    use_min: bool = True

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.k1 < 0:
            raise ValueError("k1 must be >= 0")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError("b must be in [0, 1]")
        if not (self.use_qp or self.use_dp):
            raise ValueError("at least one of use_qp/use_dp must be enabled")

    @classmethod
    def preset(cls, name: str, use_freq: bool = True) -> "PrsParams":
        p = PRS_PRESETS[name]
        return cls(n=p["n"], k1=p["k1"], b=p["b"], use_freq=use_freq)


@dataclass(frozen=True)
class ScoreBreakdown:
    doc_id: str
    qp: float
    dp: float
    score: float


class CandidatePool:
    """The flattened sentence pool of one query's top-k candidates."""

    def __init__(self, query_id: str, candidates: list[str], store: EmbeddingStore):
        self.query_id = query_id
        self.candidates = list(candidates)
        self.store = store
        self.doc_sentence_counts: dict[str, int] = {}
        rows: list[np.ndarray] = []
        row_doc: list[np.ndarray] = []
        # doc index follows ascending doc id so sentence tie-breaks are
        # independent of first-stage order
        self._doc_order = {d: i for i, d in enumerate(sorted(candidates))}
        for doc_id in candidates:
            # docs absent from the store are zero-sentence candidates: kept,
            # counted with length 0, contributing nothing to the pool
            lo, hi = store.index.get(doc_id, (0, 0))
            self.doc_sentence_counts[doc_id] = hi - lo
            if hi > lo:
                rows.append(np.arange(lo, hi, dtype=np.int64))
                row_doc.append(np.full(hi - lo, self._doc_order[doc_id], dtype=np.int64))
        self.pool_rows = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
        self.row_doc_idx = np.concatenate(row_doc) if row_doc else np.zeros(0, dtype=np.int64)
        # local sentence index within each doc
        sent = []
        for doc_id in candidates:
            c = self.doc_sentence_counts[doc_id]
            if c:
                sent.append(np.arange(c, dtype=np.int64))
        self.row_sent_idx = np.concatenate(sent) if sent else np.zeros(0, dtype=np.int64)
        counts = list(self.doc_sentence_counts.values())
        self.avgdl = float(np.mean(counts)) if counts else 0.0
        self._docid_by_order = sorted(candidates)

    def doc_order(self, doc_id: str) -> int:
        try:
            return self._doc_order[doc_id]
        except KeyError:
            raise DataError(f"doc {doc_id!r} not in pool") from None

    def __len__(self) -> int:
        return self.pool_rows.shape[0]


class NeighborSet:
    """Per-query-sentence top-n pool sentences, n_max columns wide.

    positions holds local pool indices, one row per query sentence,
    sorted by (cosine desc, doc_id asc, sent_idx asc). Restricting to the
    first n columns gives the exact top-n lists for every n <= n_max.
    """

    def __init__(self, pool: CandidatePool, positions: np.ndarray):
        self.pool = pool
        self.positions = positions

    @property
    def n_max(self) -> int:
        return self.positions.shape[1]

    def refs(self, query_sentence: int, n: int | None = None) -> list[SentenceRef]:
        cols = self.positions[query_sentence]
        if n is not None:
            cols = cols[:n]
        out = []
        for p in cols:
            doc_id = self.pool._docid_by_order[self.pool.row_doc_idx[p]]
            out.append(SentenceRef(doc_id=doc_id, sent_idx=int(self.pool.row_sent_idx[p])))
        return out


def build_pool(query: SegmentedDocument, first_stage: list[str], depth: int,
               store: EmbeddingStore) -> CandidatePool:
    """Keep the first min(depth, len(first_stage)) candidates and flatten
    their sentences; the query document itself is never a candidate."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    kept = [d for d in first_stage if d != query.id][:depth]
    q_lo, q_hi = store.index.get(query.id, (0, 0))
    if len(query.sentences) != q_hi - q_lo:
        raise MissingEmbeddingError(
            f"query {query.id!r}: store has {q_hi - q_lo} rows, "
            f"document has {len(query.sentences)} sentences"
        )
    return CandidatePool(query.id, kept, store)


def neighbors(query: SegmentedDocument, pool: CandidatePool,
              store: EmbeddingStore, n_max: int) -> NeighborSet:
    """Exact top-n_max pool sentences by cosine for every query sentence."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    n_q = len(query.sentences)
    if len(pool) == 0 or n_q == 0:
        return NeighborSet(pool, np.zeros((n_q, 0), dtype=np.int64))
    q_rows = store.doc_rows(query.id).astype(np.float64)
    p_rows = store.rows[pool.pool_rows].astype(np.float64)
    sims = q_rows @ p_rows.T
    m = min(n_max, len(pool))
    positions = np.empty((n_q, m), dtype=np.int64)
    for i in range(n_q):
        # tie-break: cosine desc, then doc id asc, then sentence index asc
        order = np.lexsort((pool.row_sent_idx, pool.row_doc_idx, -sims[i]))
        positions[i] = order[:m]
    return NeighborSet(pool, positions)


def _f_counts(pool: CandidatePool, nb: NeighborSet, n: int) -> np.ndarray:
    """(query sentences x docs) matrix: pool sentences of each doc among
    each query sentence's top-n neighbors."""
    n_docs = len(pool.candidates)
    pos = nb.positions[:, :n]
    f = np.zeros((pos.shape[0], n_docs), dtype=np.int64)
    if pos.size:
        docs = pool.row_doc_idx[pos]
        np.add.at(f, (np.repeat(np.arange(pos.shape[0]), pos.shape[1]), docs.ravel()), 1)
    return f


def _g_counts(pool: CandidatePool, nb: NeighborSet, n: int) -> np.ndarray:
    """Per pool sentence: in how many of the top-n neighbor lists it occurs."""
    pos = nb.positions[:, :n]
    return np.bincount(pos.ravel(), minlength=len(pool)).astype(np.int64)


def q_rn(doc_id: str, pool: CandidatePool, nb: NeighborSet, n: int,
         use_min: bool = True) -> int:
    """Number of query sentences with at least one of the doc's sentences
    among their top-n neighbors (raw intersection sizes without min)."""
    d = pool.doc_order(doc_id)
    f = _f_counts(pool, nb, n)[:, d]
    return int(np.minimum(f, 1).sum() if use_min else f.sum())


def d_rn(doc_id: str, pool: CandidatePool, nb: NeighborSet, n: int,
         use_min: bool = True) -> int:
    """Number of the doc's sentences occurring in any top-n neighbor list
    (total occurrences without min)."""
    d = pool.doc_order(doc_id)
    g = _g_counts(pool, nb, n)[pool.row_doc_idx == d]
    return int(np.minimum(g, 1).sum() if use_min else g.sum())


def _combine(doc_id: str, qp: float, dp: float, params: PrsParams) -> ScoreBreakdown:
    score = 1.0
    if params.use_qp:
        score *= qp
    if params.use_dp:
        score *= dp
    return ScoreBreakdown(doc_id=doc_id, qp=qp, dp=dp, score=score)


def score_base(doc_id: str, query: SegmentedDocument, pool: CandidatePool,
               nb: NeighborSet, params: PrsParams) -> ScoreBreakdown:
    """Base variant: product of query and document proportions."""
    if params.use_freq:
        raise ValueError("score_base requires use_freq=False")
    n_q = len(query.sentences)
    if n_q == 0:
        raise EmptyQueryError(f"query {query.id!r} has no sentences")
    n_d = pool.doc_sentence_counts[doc_id] if doc_id in pool.doc_sentence_counts else None
    if n_d is None:
        raise DataError(f"doc {doc_id!r} not in pool")
    qp = q_rn(doc_id, pool, nb, params.n, params.use_min) / n_q
    dp = d_rn(doc_id, pool, nb, params.n, params.use_min) / n_d if n_d else 0.0
    return _combine(doc_id, qp, dp, params)


def _saturated(counts: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Elementwise counts/(counts+k) with 0/0 (k1=0, no match) giving 0."""
    denom = counts + k
    return np.divide(counts, denom, out=np.zeros_like(counts), where=denom > 0)


def _saturation_denominator(params: PrsParams, dl: int, avgdl: float) -> float:
    ratio = dl / avgdl if avgdl > 0 else 0.0
    return params.k1 * ((1.0 - params.b) + params.b * ratio)


def score_freq(doc_id: str, query: SegmentedDocument, pool: CandidatePool,
               nb: NeighborSet, params: PrsParams) -> ScoreBreakdown:
    """Frequency-saturated variant.

    Per query sentence, the intersection size f contributes f/(f+K); per
    document sentence, its occurrence count g contributes g/(g+K), with
    K = k1*((1-b) + b*dl/avgdl) and dl the candidate's sentence count.
    0/0 (k1=0 with no match) resolves to 0.
    """
    if not params.use_freq:
        raise ValueError("score_freq requires use_freq=True")
    n_q = len(query.sentences)
    if n_q == 0:
        raise EmptyQueryError(f"query {query.id!r} has no sentences")
    if doc_id not in pool.doc_sentence_counts:
        raise DataError(f"doc {doc_id!r} not in pool")
    n_d = pool.doc_sentence_counts[doc_id]
    d = pool.doc_order(doc_id)
    k = _saturation_denominator(params, n_d, pool.avgdl)
    f = _f_counts(pool, nb, params.n)[:, d].astype(np.float64)
    fq = float(_saturated(f, np.full_like(f, k)).sum())
    g = _g_counts(pool, nb, params.n)[pool.row_doc_idx == d].astype(np.float64)
    fd = float(_saturated(g, np.full_like(g, k)).sum())
    qp = fq / n_q
    dp = fd / n_d if n_d else 0.0
    return _combine(doc_id, qp, dp, params)


class PooledScorer:
    """Scores every pool candidate at once; neighbor lists are computed a
    single time at n_max and shared by all n <= n_max (used heavily by the
    grid search)."""

    def __init__(self, query: SegmentedDocument, pool: CandidatePool, nb: NeighborSet):
        if len(query.sentences) == 0:
            raise EmptyQueryError(f"query {query.id!r} has no sentences")
        self.query = query
        self.pool = pool
        self.nb = nb
        self._by_n: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        counts = np.array(
            [pool.doc_sentence_counts[d] for d in pool._docid_by_order], dtype=np.float64
        )
        self._doc_lengths = counts
        self._candidate_order = np.array(
            [pool.doc_order(d) for d in pool.candidates], dtype=np.int64
        )
        self._length_ratio = np.divide(
            counts, pool.avgdl, out=np.zeros_like(counts), where=pool.avgdl > 0
        )

    def _counts(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        cached = self._by_n.get(n)
        if cached is None:
            cached = (
                _f_counts(self.pool, self.nb, n).astype(np.float64),
                _g_counts(self.pool, self.nb, n).astype(np.float64),
            )
            self._by_n[n] = cached
        return cached

    def proportions(self, params: PrsParams) -> tuple[np.ndarray, np.ndarray]:
        """(qp, dp) arrays indexed by the pool's sorted doc order."""
        pool = self.pool
        n_q = len(self.query.sentences)
        n_docs = len(pool.candidates)
        f, g = self._counts(min(params.n, self.nb.n_max))
        dl = self._doc_lengths
        k = params.k1 * ((1.0 - params.b) + params.b * self._length_ratio)  # per doc
        if params.use_freq:
            qr = _saturated(f, np.broadcast_to(k[None, :], f.shape)).sum(axis=0)
            kr = k[pool.row_doc_idx] if len(pool) else np.zeros(0)
            dr = np.bincount(pool.row_doc_idx, weights=_saturated(g, kr), minlength=n_docs)
        elif params.use_min:
            qr = (f > 0).sum(axis=0).astype(np.float64)
            dr = np.bincount(
                pool.row_doc_idx, weights=(g > 0).astype(np.float64), minlength=n_docs
            )
        else:
            qr = f.sum(axis=0)
            dr = np.bincount(pool.row_doc_idx, weights=g, minlength=n_docs)
        qp = qr / n_q
        # bincount yields int64 when the weights array is empty
        dr = np.asarray(dr, dtype=np.float64)
        dp = np.divide(dr, dl, out=np.zeros_like(dr), where=dl > 0)
        return qp, dp

    def score_array(self, params: PrsParams) -> np.ndarray:
        """Scores in first-stage candidate order, no per-doc objects."""
        qp, dp = self.proportions(params)
        score = np.ones_like(qp)
        if params.use_qp:
            score = score * qp
        if params.use_dp:
            score = score * dp
        return score[self._candidate_order]

    def score_matrix(self, n: int, k1_values: np.ndarray,
                     b_values: np.ndarray) -> np.ndarray:
        """Frequency-saturated scores for a whole (k1, b) grid at once.

        Returns an array of shape (len(k1_values) * len(b_values),
        n_candidates) in first-stage candidate order; rows follow the
        nesting ``for k1: for b``. Numerically identical to calling
        score_array cell by cell with use_freq=True.
        """
        pool = self.pool
        n_q = len(self.query.sentences)
        n_docs = len(pool.candidates)
        f, g = self._counts(min(n, self.nb.n_max))
        k1g = np.repeat(np.asarray(k1_values, dtype=np.float64), len(b_values))
        bg = np.tile(np.asarray(b_values, dtype=np.float64), len(k1_values))
        # per-cell, per-doc saturation constant
        k = k1g[:, None] * ((1.0 - bg[:, None]) + bg[:, None] * self._length_ratio)
        denom = f[None, :, :] + k[:, None, :]
        qr = np.divide(
            np.broadcast_to(f, denom.shape), denom,
            out=np.zeros_like(denom), where=denom > 0,
        ).sum(axis=1)
        kr = k[:, pool.row_doc_idx] if len(pool) else np.zeros((len(k1g), 0))
        denr = g[None, :] + kr
        satg = np.divide(
            np.broadcast_to(g, denr.shape), denr,
            out=np.zeros_like(denr), where=denr > 0,
        )
        dr = np.empty((len(k1g), n_docs))
        for c in range(len(k1g)):
            dr[c] = np.bincount(pool.row_doc_idx, weights=satg[c], minlength=n_docs)
        qp = qr / n_q
        dp = np.divide(dr, self._doc_lengths, out=np.zeros_like(dr),
                       where=self._doc_lengths > 0)
        return (qp * dp)[:, self._candidate_order]

    def score_all(self, params: PrsParams) -> list[ScoreBreakdown]:
        """Breakdowns for every candidate, in first-stage candidate order."""
        qp, dp = self.proportions(params)
        pool = self.pool
        out = []
        for doc_id in pool.candidates:
            d = pool.doc_order(doc_id)
            out.append(_combine(doc_id, float(qp[d]), float(dp[d]), params))
        return out


def rerank(query: SegmentedDocument, first_stage: list[str], depth: int,
           store: EmbeddingStore, params: PrsParams,
           scorer: PooledScorer | None = None) -> list[ScoreBreakdown]:
    """Score the top-``depth`` candidates and sort them descending, ties
    by first-stage rank; candidates beyond depth keep their first-stage
    order below the re-ranked block (score 0)."""
    first_stage = [d for d in first_stage if d != query.id]
    if scorer is None:
        pool = build_pool(query, first_stage, depth, store)
        nb = neighbors(query, pool, store, params.n)
        scorer = PooledScorer(query, pool, nb)
    breakdowns = scorer.score_all(params)
    fs_rank = {d: i for i, d in enumerate(first_stage)}
    ranked = sorted(breakdowns, key=lambda b: (-b.score, fs_rank[b.doc_id]))
    tail = [
        ScoreBreakdown(doc_id=d, qp=0.0, dp=0.0, score=0.0)
        for d in first_stage[len(breakdowns):]
    ]
    return ranked + tail
