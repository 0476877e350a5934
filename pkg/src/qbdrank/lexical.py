"""First-stage lexical retrieval: inverted index, BM25, and KLI query
reduction for document-length queries."""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from pathlib import Path

from .corpus import DuplicateIdError, SegmentedDocument
from .errors import DataError

INDEX_MAGIC = b"QBIX1\n"

# BM25 parameter presets; "coliee_optimized" is the tuned first-stage setting
# for legal case retrieval.
BM25_PRESETS = {
    "default": {"k1": 1.2, "b": 0.75},
    "coliee_optimized": {"k1": 2.8, "b": 1.0},
}

_TOKEN_SPLIT = re.compile(r"[^0-9a-z]+")


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 1.2
    b: float = 0.75

    def __post_init__(self):
        if self.k1 < 0:
            raise ValueError("k1 must be >= 0")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError("b must be in [0, 1]")


def tokenize(text: str, stoplist: frozenset[str] | None = None) -> list[str]:
    """Lowercase, split on non-alphanumeric, drop empties."""
    tokens = [t for t in _TOKEN_SPLIT.split(text.lower()) if t]
    if stoplist:
        tokens = [t for t in tokens if t not in stoplist]
    return tokens


class InvertedIndex:
    """Term -> (doc_id, tf) postings with document length statistics."""

    def __init__(self):
        self.postings: dict[str, list[tuple[str, int]]] = {}
        self.doc_lengths: dict[str, int] = {}
        self._tf: dict[tuple[str, str], int] = {}

    @property
    def n_docs(self) -> int:
        return len(self.doc_lengths)

    @property
    def avg_len(self) -> float:
        if not self.doc_lengths:
            return 0.0
        return sum(self.doc_lengths.values()) / len(self.doc_lengths)

    @property
    def total_tokens(self) -> int:
        return sum(self.doc_lengths.values())

    def collection_frequency(self, term: str) -> int:
        return sum(tf for _d, tf in self.postings.get(term, ()))

    def term_frequency(self, term: str, doc_id: str) -> int:
        return self._tf.get((term, doc_id), 0)

    def _finalize(self) -> None:
        for term in self.postings:
            self.postings[term].sort(key=lambda p: p[0])
        self._tf = {(t, d): tf for t, plist in self.postings.items() for d, tf in plist}


def build_index(docs: list[SegmentedDocument],
                stoplist: frozenset[str] | None = None) -> InvertedIndex:
    index = InvertedIndex()
    for doc in docs:
        if doc.id in index.doc_lengths:
            raise DuplicateIdError(f"duplicate doc id {doc.id!r}")
        tokens = tokenize(" ".join(doc.sentences), stoplist)
        index.doc_lengths[doc.id] = len(tokens)
        counts: dict[str, int] = {}
        for t in tokens:
            counts[t] = counts.get(t, 0) + 1
        for term, tf in counts.items():
            index.postings.setdefault(term, []).append((doc.id, tf))
    index._finalize()
    return index


def _rsj(index: InvertedIndex, term: str) -> float:
    df = len(index.postings.get(term, ()))
    if df == 0:
        return 0.0
    return max(0.0, math.log((index.n_docs - df + 0.5) / (df + 0.5)))


def bm25_score(index: InvertedIndex, params: Bm25Params,
               query_terms: list[str], doc_id: str) -> float:
    """Okapi BM25 with the RSJ weight floored at zero.

    Duplicate query terms contribute once per occurrence in the list.
    """
    if doc_id not in index.doc_lengths:
        raise DataError(f"unknown doc id {doc_id!r}")
    dl = index.doc_lengths[doc_id]
    avg = index.avg_len
    length_part = (1.0 - params.b) + (params.b * dl / avg if avg > 0 else 0.0)
    score = 0.0
    for term in query_terms:
        tf = index.term_frequency(term, doc_id)
        if tf == 0:
            continue
        score += _rsj(index, term) * tf / (tf + params.k1 * length_part)
    return score


def bm25_search(index: InvertedIndex, params: Bm25Params,
                query: SegmentedDocument, depth: int,
                query_terms: list[str] | None = None) -> list[tuple[str, float]]:
    """Top-``depth`` documents by BM25, ties broken by ascending doc id.

    The query's own document is excluded when present in the index.
    ``query_terms`` overrides the default tokenization of the query text
    (used for KLI-reduced queries).
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if query_terms is None:
        query_terms = tokenize(" ".join(query.sentences))
    # accumulate over postings of the distinct terms, weighting by the
    # number of occurrences in the query term list
    term_counts: dict[str, int] = {}
    for t in query_terms:
        term_counts[t] = term_counts.get(t, 0) + 1
    avg = index.avg_len
    scores: dict[str, float] = {}
    for term, qcount in term_counts.items():
        plist = index.postings.get(term)
        if not plist:
            continue
        w = _rsj(index, term) * qcount
        if w == 0.0:
            continue
        for doc_id, tf in plist:
            length_part = (1.0 - params.b) + (
                params.b * index.doc_lengths[doc_id] / avg if avg > 0 else 0.0
            )
            scores[doc_id] = scores.get(doc_id, 0.0) + w * tf / (tf + params.k1 * length_part)
    scores.pop(query.id, None)
    ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked[:depth]


def kli_reduce(index: InvertedIndex, query: SegmentedDocument,
               fraction: float = 0.1) -> list[str]:
    """Select the most informative query terms by relative entropy.

    Each unique query term t is scored P(t|q) * ln(P(t|q) / P(t|C)) where
    P(t|q) is its frequency within the query and P(t|C) its add-one
    smoothed collection frequency. Returns the top ceil(fraction * unique
    terms) by score, ties broken by ascending term.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must be in (0, 1]")
    qterms = tokenize(" ".join(query.sentences))
    if not qterms:
        raise DataError(f"query {query.id!r} has no terms")
    counts: dict[str, int] = {}
    for t in qterms:
        counts[t] = counts.get(t, 0) + 1
    qlen = len(qterms)
    vocab = set(index.postings) | set(counts)
    denom = index.total_tokens + len(vocab)
    scored = []
    for term, tf in counts.items():
        p_q = tf / qlen
        p_c = (index.collection_frequency(term) + 1) / denom
        scored.append((p_q * math.log(p_q / p_c), term))
    scored.sort(key=lambda st: (-st[0], st[1]))
    keep = math.ceil(fraction * len(scored))
    return [term for _s, term in scored[:keep]]


def save_index(index: InvertedIndex, path: str | Path) -> None:
    payload = {
        "postings": {t: [[d, tf] for d, tf in plist] for t, plist in index.postings.items()},
        "doc_lengths": index.doc_lengths,
    }
    with open(path, "wb") as fh:
        fh.write(INDEX_MAGIC)
        fh.write(json.dumps(payload).encode("utf-8"))


def load_index(path: str | Path) -> InvertedIndex:
    with open(path, "rb") as fh:
        magic = fh.read(len(INDEX_MAGIC))
        if magic != INDEX_MAGIC:
            raise DataError(f"{path}: not an index file")
        payload = json.loads(fh.read().decode("utf-8"))
    index = InvertedIndex()
    index.doc_lengths = dict(payload["doc_lengths"])
    index.postings = {
        t: [(d, int(tf)) for d, tf in plist] for t, plist in payload["postings"].items()
    }
    index._finalize()
    return index
