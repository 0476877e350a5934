"""Shared test helpers: an independent naive scorer and synthetic corpora.

The naive scorer recomputes everything literally (all pairwise cosines,
full sorts, explicit set membership counting) and never touches the
package's pooled/vectorized code paths, so it can serve as an oracle.
"""
from __future__ import annotations

import numpy as np
import pytest

from qbdrank.corpus import SegmentedDocument
from qbdrank.embed import EmbeddingStore, SentenceRef


def make_store(doc_vectors: dict[str, np.ndarray]) -> EmbeddingStore:
    """Build a store from {doc_id: (n_sentences, dim) matrix}."""
    rows = []
    manifest = []
    for doc_id, matrix in doc_vectors.items():
        for i in range(matrix.shape[0]):
            rows.append(matrix[i])
            manifest.append(SentenceRef(doc_id=doc_id, sent_idx=i))
    dim = next(iter(doc_vectors.values())).shape[1]
    data = np.vstack(rows).astype(np.float32) if rows else np.zeros((0, dim), np.float32)
    return EmbeddingStore(data, manifest)


def make_doc(doc_id: str, n_sentences: int) -> SegmentedDocument:
    sentences = tuple(f"s{i}" for i in range(n_sentences))
    bounds = ((0, n_sentences),) if n_sentences else ()
    return SegmentedDocument(id=doc_id, sentences=sentences,
                             paragraph_bounds=bounds,
                             token_count=n_sentences)


def random_unit_vectors(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    m = rng.standard_normal((n, dim))
    return m / np.linalg.norm(m, axis=1, keepdims=True)


def naive_scores(store: EmbeddingStore, query_id: str, candidates: list[str],
                 n: int, k1: float = 0.0, b: float = 0.0,
                 use_freq: bool = False, use_min: bool = True,
                 use_qp: bool = True, use_dp: bool = True) -> dict[str, dict]:
    """Literal re-implementation of the proportional scorers.

    Works sentence by sentence with python loops; returns
    {doc_id: {"qp":, "dp":, "score":}}.
    """
    q_lo, q_hi = store.index[query_id]
    query_vecs = [store.rows[i].astype(np.float64) for i in range(q_lo, q_hi)]
    pool = []  # (doc_id, sent_idx, vec)
    counts = {}
    for doc_id in candidates:
        lo, hi = store.index.get(doc_id, (0, 0))
        counts[doc_id] = hi - lo
        for i in range(lo, hi):
            pool.append((doc_id, i - lo, store.rows[i].astype(np.float64)))
    avgdl = sum(counts.values()) / len(counts) if counts else 0.0

    # top-n neighbor set per query sentence
    r_lists: list[list[tuple[str, int]]] = []
    for qv in query_vecs:
        ranked = sorted(
            pool,
            key=lambda e: (-float(np.dot(qv, e[2])), e[0], e[1]),
        )
        r_lists.append([(d, s) for d, s, _v in ranked[:n]])

    out = {}
    n_q = len(query_vecs)
    for doc_id in candidates:
        dl = counts[doc_id]
        k = k1 * ((1.0 - b) + (b * dl / avgdl if avgdl > 0 else 0.0))
        # per query sentence: how many of this doc's sentences are in r_n
        f_values = [
            sum(1 for (d, _s) in r_list if d == doc_id) for r_list in r_lists
        ]
        # per doc sentence: occurrences across all r_n lists
        g_values = [
            sum(1 for r_list in r_lists if (doc_id, s) in r_list)
            for s in range(dl)
        ]
        if use_freq:
            q_part = sum(f / (f + k) for f in f_values if f > 0)
            d_part = sum(g / (g + k) for g in g_values if g > 0)
        elif use_min:
            q_part = sum(min(1, f) for f in f_values)
            d_part = sum(min(1, g) for g in g_values)
        else:
            q_part = sum(f_values)
            d_part = sum(g_values)
        qp = q_part / n_q
        dp = d_part / dl if dl else 0.0
        score = 1.0
        if use_qp:
            score *= qp
        if use_dp:
            score *= dp
        out[doc_id] = {"qp": qp, "dp": dp, "score": score}
    return out


def random_instance(rng: np.random.Generator, max_docs: int = 5,
                    max_sents: int = 6, dim: int = 8):
    """A random small scoring instance: store, query doc, candidate list."""
    n_docs = int(rng.integers(1, max_docs + 1))
    n_q = int(rng.integers(1, max_sents + 1))
    doc_vectors = {"query": random_unit_vectors(rng, n_q, dim)}
    candidates = []
    for i in range(n_docs):
        doc_id = f"d{i}"
        n_s = int(rng.integers(0, max_sents + 1))
        if n_s == 0 and n_docs == 1:
            n_s = 1  # avoid a fully empty pool
        if n_s:
            doc_vectors[doc_id] = random_unit_vectors(rng, n_s, dim)
        else:
            doc_vectors[doc_id] = np.zeros((0, dim))
        candidates.append(doc_id)
    # occasionally plant exact duplicates to exercise tie-breaks
    if n_docs >= 2 and rng.random() < 0.3 and doc_vectors["d0"].shape[0]:
        dup = doc_vectors["d0"][0]
        tgt = doc_vectors["d1"]
        if tgt.shape[0]:
            tgt[0] = dup
    rows = []
    manifest = []
    for doc_id in ["query"] + candidates:
        m = doc_vectors[doc_id]
        for i in range(m.shape[0]):
            rows.append(m[i])
            manifest.append(SentenceRef(doc_id=doc_id, sent_idx=i))
    data = np.vstack(rows).astype(np.float32)
    store = EmbeddingStore(data, manifest)
    query = make_doc("query", n_q)
    return store, query, candidates


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def make_planted_corpus(seed: int = 11, n_docs: int = 200, n_queries: int = 20,
                        late: bool = False):
    """Synthetic benchmark with known relevance.

    Every query has 20 sentences; each of its 3 relevant docs contains
    verbatim copies of a disjoint 30% slice (6 sentences). Each query also
    gets 3 distractor docs made of the query's own words scrambled into
    new sentences: lexically they look exactly like the query, but no
    sentence matches. With ``late`` the copies sit after 40 filler
    sentences (past token 320), so truncating inputs to 256 tokens removes
    all the evidence.
    """
    from qbdrank.corpus import Qrels, RawDocument

    rng = np.random.default_rng(seed)
    vocab = np.array([f"W{i:03d}" for i in range(400)])

    def sentence() -> str:
        return " ".join(rng.choice(vocab, size=8)) + "."

    queries = []
    qrels = Qrels()
    doc_texts: dict[str, str] = {}
    did = 0
    for qi in range(n_queries):
        q_sents = [sentence() for _ in range(20)]
        qid = f"q{qi:02d}"
        queries.append(RawDocument(id=qid, text=" ".join(q_sents)))
        for r in range(3):
            shared = q_sents[r * 6 : (r + 1) * 6]
            if late:
                sents = [sentence() for _ in range(40)] + shared
            else:
                sents = [sentence() for _ in range(14)] + shared
                order = rng.permutation(len(sents))
                sents = [sents[i] for i in order]
            doc_id = f"d{did:03d}"
            did += 1
            doc_texts[doc_id] = " ".join(sents)
            qrels.add(qid, doc_id, 1)
        q_words = np.array(" ".join(q_sents).replace(".", "").split())
        for _ in range(3):
            shuffled = q_words[rng.permutation(len(q_words))]
            scrambled = [
                " ".join(shuffled[i : i + 8]) + "." for i in range(0, len(shuffled), 8)
            ]
            doc_id = f"d{did:03d}"
            did += 1
            doc_texts[doc_id] = " ".join(scrambled)
            qrels.add(qid, doc_id, 0)
    while did < n_docs:
        filler_len = 46 if late else int(rng.integers(16, 25))
        doc_id = f"d{did:03d}"
        did += 1
        doc_texts[doc_id] = " ".join(sentence() for _ in range(filler_len))
    docs = [RawDocument(id=d, text=t) for d, t in sorted(doc_texts.items())]
    return docs, queries, qrels


def make_length_bias_corpus(seed: int = 29, n_cands: int = 80):
    """One long query plus candidates of wildly varying length.

    Each candidate copies a random fraction of its own sentences from the
    query (each copy has one word mutated), so the amount of matching
    material scales with document length while the match *density* is an
    independent random draw. Sentences are grouped into 5-sentence
    paragraphs. Returns (query, candidates) as RawDocuments.
    """
    from qbdrank.corpus import RawDocument

    rng = np.random.default_rng(seed)
    vocab = np.array([f"W{i:03d}" for i in range(400)])

    def sentence() -> str:
        return " ".join(rng.choice(vocab, size=8)) + "."

    def paragraphs(sents: list[str]) -> str:
        chunks = [" ".join(sents[i : i + 5]) for i in range(0, len(sents), 5)]
        return "\n\n".join(chunks)

    q_sents = [sentence() for _ in range(40)]
    query = RawDocument(id="query", text=paragraphs(q_sents))
    candidates = []
    for ci in range(n_cands):
        length = int(rng.integers(10, 201))
        density = float(rng.uniform(0.02, 0.25))
        n_copy = max(1, round(density * length))
        sents = [sentence() for _ in range(length - n_copy)]
        # spread the copies over distinct query sentences first so longer
        # docs cover more of the query instead of repeating one sentence
        sources = [int(x) for x in rng.permutation(40)]
        for j in range(n_copy):
            words = q_sents[sources[j % 40]].rstrip(".").split()
            words[int(rng.integers(0, 8))] = str(rng.choice(vocab))
            sents.append(" ".join(words) + ".")
        order = rng.permutation(len(sents))
        sents = [sents[i] for i in order]
        candidates.append(RawDocument(id=f"c{ci:03d}", text=paragraphs(sents)))
    return query, candidates
