"""Diagnostic computations: length-bias correlation, retrieval
probability by document length, and truncation / unit-size sweeps.

Everything emits plain CSV for external plotting. Schemas:
correlation.csv (model,dataset,r); bins.csv (bin_lo,bin_hi,p_rel,p_ret);
sweep.csv (x,metric,value).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Qrels, RawDocument
from .errors import ConfigError, DataError
from .evaluation import Run
from .pipeline import PipelineConfig, run_pipeline

DEFAULT_BIN_EDGES = tuple(range(0, 11000, 1000))


@dataclass(frozen=True)
class LengthBins:
    """Word-count bin edges (strictly increasing, half-open bins)."""

    edges: tuple[int, ...] = DEFAULT_BIN_EDGES

    def __post_init__(self):
        if len(self.edges) < 2 or any(
            b <= a for a, b in zip(self.edges, self.edges[1:])
        ):
            raise ConfigError("bin edges must be strictly increasing")

    def locate(self, length: int) -> int | None:
        for i, (lo, hi) in enumerate(zip(self.edges, self.edges[1:])):
            if lo <= length < hi:
                return i
        return None


def length_score_correlation(run: Run, doc_lengths_words: dict[str, int],
                             per_query_mean: bool = False) -> float:
    """Pearson r between candidate document length and relevance score,
    pooled over all queries (or averaged per query)."""

    def pearson(xs: np.ndarray, ys: np.ndarray) -> float:
        if xs.size < 2:
            raise DataError("need at least two scored documents")
        if np.std(xs) == 0 or np.std(ys) == 0:
            raise DataError("Pearson r undefined: zero variance")
        return float(np.corrcoef(xs, ys)[0, 1])

    if per_query_mean:
        values = []
        for qid, entries in run.items():
            xs = np.array([doc_lengths_words[d] for d, _s in entries], dtype=float)
            ys = np.array([s for _d, s in entries], dtype=float)
            values.append(pearson(xs, ys))
        if not values:
            raise DataError("empty run")
        return float(np.mean(values))
    xs = np.array(
        [doc_lengths_words[d] for entries in run.values() for d, _s in entries],
        dtype=float,
    )
    ys = np.array([s for entries in run.values() for _d, s in entries], dtype=float)
    return pearson(xs, ys)


def retrieval_probability_by_length(
    run: Run, qrels: Qrels, doc_lengths_words: dict[str, int],
    bins: LengthBins = LengthBins(), k: int = 5,
) -> list[tuple[int, int, float | None, float | None]]:
    """Per length bin: P(relevant | length) over all judged docs, and
    P(retrieved in top-k | relevant, length). Empty bins yield None, not 0.
    """
    n_bins = len(bins.edges) - 1
    judged = [0] * n_bins
    relevant = [0] * n_bins
    retrieved = [0] * n_bins
    for qid in qrels.judged_query_ids():
        rel = qrels.relevant_docs(qid)
        topk = {d for d, _s in run.get(qid, [])[:k]}
        for (q, did), grade in qrels.grades.items():
            if q != qid:
                continue
            b = bins.locate(doc_lengths_words.get(did, -1))
            if b is None:
                continue
            judged[b] += 1
            if grade > 0:
                relevant[b] += 1
                if did in topk:
                    retrieved[b] += 1
    out = []
    for i in range(n_bins):
        p_rel = relevant[i] / judged[i] if judged[i] else None
        p_ret = retrieved[i] / relevant[i] if relevant[i] else None
        out.append((bins.edges[i], bins.edges[i + 1], p_rel, p_ret))
    return out


def write_bins_csv(rows, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_lo", "bin_hi", "p_rel", "p_ret"])
        for lo, hi, p_rel, p_ret in rows:
            writer.writerow([
                lo, hi,
                "" if p_rel is None else f"{p_rel:.6f}",
                "" if p_ret is None else f"{p_ret:.6f}",
            ])


def write_correlation_csv(rows: list[tuple[str, str, float]], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "dataset", "r"])
        for model, dataset, r in rows:
            writer.writerow([model, dataset, f"{r:.6f}"])


def truncation_sweep(queries: list[RawDocument], docs: list[RawDocument],
                     qrels: Qrels, lengths: list[int],
                     config: PipelineConfig) -> list[tuple[str, float]]:
    """Re-run the whole pipeline at each input-truncation length."""
    rows = []
    for length in lengths:
        _run, value = run_pipeline(docs, queries, qrels, config, max_tokens=length)
        rows.append((str(length), value))
    return rows


def unit_size_sweep(queries: list[RawDocument], docs: list[RawDocument],
                    qrels: Qrels, unit_sizes: list[int],
                    config: PipelineConfig) -> list[tuple[str, float]]:
    """Pipeline objective per fixed-length unit size, plus a final row
    for the default sentence splitter."""
    rows = []
    for unit in unit_sizes:
        _run, value = run_pipeline(docs, queries, qrels, config, unit_tokens=unit)
        rows.append((str(unit), value))
    _run, value = run_pipeline(docs, queries, qrels, config)
    rows.append(("sentence", value))
    return rows


def write_sweep_csv(rows: list[tuple[str, float]], metric: str, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "metric", "value"])
        for x, value in rows:
            writer.writerow([x, metric, f"{value:.6f}"])
