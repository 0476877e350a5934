"""Query-by-document retrieval: sentence-level proportional relevance
re-ranking over a lexical first stage, with evaluation and tuning tools."""

from .corpus import (Qrels, RawDocument, SegmentedDocument, load_corpus,
                     load_qrels, segment, segment_fixed_length, truncate)
from .embed import (EmbeddingStore, SentenceRef, cosine, ingest, stub_embed,
                    write_store)
from .lexical import (Bm25Params, InvertedIndex, bm25_score, bm25_search,
                      build_index, kli_reduce, tokenize)
from .rprs import (CandidatePool, NeighborSet, PrsParams, ScoreBreakdown,
                   build_pool, d_rn, neighbors, q_rn, rerank, score_base,
                   score_freq)

__all__ = [
    "Qrels", "RawDocument", "SegmentedDocument", "load_corpus", "load_qrels",
    "segment", "segment_fixed_length", "truncate",
    "EmbeddingStore", "SentenceRef", "cosine", "ingest", "stub_embed", "write_store",
    "Bm25Params", "InvertedIndex", "bm25_score", "bm25_search", "build_index",
    "kli_reduce", "tokenize",
    "CandidatePool", "NeighborSet", "PrsParams", "ScoreBreakdown", "build_pool",
    "d_rn", "neighbors", "q_rn", "rerank", "score_base", "score_freq",
]

__version__ = "0.1.0"
