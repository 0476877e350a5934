"""Run-file metrics and paired significance testing.

Runs are per-query ranked lists (doc, score, rank) in TREC format:
"qid Q0 docid rank score tag". Relevance is binary: a grade > 0 counts
as relevant. Queries without any relevant document are excluded from all
macro averages.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from scipy import stats

from .corpus import Qrels
from .errors import DataError

# Run entries are (doc_id, score) per query; ranks are implicit 1..m.
Run = dict[str, list[tuple[str, float]]]


@dataclass
class MetricReport:
    """Macro metric values plus the per-query values behind them."""

    values: dict[str, float] = field(default_factory=dict)
    per_query: dict[str, dict[str, float]] = field(default_factory=dict)
    cutoffs: tuple[int, ...] = ()

    def to_json(self) -> str:
        return json.dumps(
            {"values": self.values, "cutoffs": list(self.cutoffs),
             "per_query": self.per_query},
            indent=2, sort_keys=True,
        )

    def write_per_query_csv(self, path: str | Path) -> None:
        metrics = sorted(self.values)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["query_id"] + metrics)
            for qid in sorted(self.per_query):
                writer.writerow([qid] + [self.per_query[qid].get(m, "") for m in metrics])


def read_run(path: str | Path) -> Run:
    run: Run = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 6:
                raise DataError(f"{path}: malformed run line {lineno}")
            qid, _q0, did, _rank, score, _tag = parts
            run.setdefault(qid, []).append((did, float(score)))
    return run


def write_run(run: Run, path: str | Path, tag: str = "qbdrank") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for qid in sorted(run):
            for rank, (did, score) in enumerate(run[qid], start=1):
                fh.write(f"{qid} Q0 {did} {rank} {score:.6f} {tag}\n")


def _per_query_set_metrics(run: Run, qrels: Qrels, k: int):
    per_query: dict[str, tuple[float, float, int]] = {}
    for qid in qrels.judged_query_ids():
        relevant = qrels.relevant_docs(qid)
        retrieved = [d for d, _s in run.get(qid, [])][:k]
        hits = len(set(retrieved) & relevant)
        per_query[qid] = (hits / k, hits / len(relevant), hits)
    return per_query


def set_metrics(run: Run, qrels: Qrels, k: int = 5,
                micro: bool = False) -> tuple[float, float, float]:
    """Precision/recall at a fixed cutoff k, and their F1.

    Macro by default: per-query P and R are averaged, then combined. The
    micro variant pools hit counts across queries first.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    per_query = _per_query_set_metrics(run, qrels, k)
    if not per_query:
        return (0.0, 0.0, 0.0)
    if micro:
        total_hits = sum(h for _p, _r, h in per_query.values())
        total_relevant = sum(len(qrels.relevant_docs(q)) for q in per_query)
        p = total_hits / (k * len(per_query))
        r = total_hits / total_relevant if total_relevant else 0.0
    else:
        p = sum(v[0] for v in per_query.values()) / len(per_query)
        r = sum(v[1] for v in per_query.values()) / len(per_query)
    f1 = 2 * p * r / (p + r) if (p + r) > 0 else 0.0
    return (p, r, f1)


def _average_precision(ranked: list[str], relevant: set[str], k: int) -> float:
    hits = 0
    score = 0.0
    for i, did in enumerate(ranked[:k], start=1):
        if did in relevant:
            hits += 1
            score += hits / i
    denom = min(len(relevant), k)
    return score / denom if denom else 0.0


def _ndcg(ranked: list[str], relevant: set[str], k: int) -> float:
    dcg = sum(
        1.0 / math.log2(i + 1)
        for i, did in enumerate(ranked[:k], start=1)
        if did in relevant
    )
    ideal = sum(1.0 / math.log2(i + 1) for i in range(1, min(len(relevant), k) + 1))
    return dcg / ideal if ideal else 0.0


def rank_metrics(run: Run, qrels: Qrels, cutoffs: tuple[int, ...] = (5, 10)) -> MetricReport:
    """MAP@k, NDCG@k, recall@k and precision@k per cutoff, plus MRR and MPR.

    MPR averages 100 * (1 - (rank-1)/N) over every (query, relevant doc)
    pair, with N the number of candidates ranked for the query; relevant
    docs missing from the run count at percentile 0.
    """
    if not cutoffs:
        raise ValueError("cutoffs must be non-empty")
    report = MetricReport(cutoffs=tuple(cutoffs))
    qids = qrels.judged_query_ids()
    if not qids:
        return report
    for qid in qids:
        relevant = qrels.relevant_docs(qid)
        ranked = [d for d, _s in run.get(qid, [])]
        pq: dict[str, float] = {}
        for k in cutoffs:
            hits = len(set(ranked[:k]) & relevant)
            pq[f"map@{k}"] = _average_precision(ranked, relevant, k)
            pq[f"ndcg@{k}"] = _ndcg(ranked, relevant, k)
            pq[f"recall@{k}"] = hits / len(relevant)
            pq[f"p@{k}"] = hits / k
        rr = 0.0
        for i, did in enumerate(ranked, start=1):
            if did in relevant:
                rr = 1.0 / i
                break
        pq["mrr"] = rr
        n_ranked = len(ranked)
        positions = {d: i for i, d in enumerate(ranked, start=1)}
        percentiles = []
        for did in relevant:
            if did in positions and n_ranked > 0:
                percentiles.append(100.0 * (1.0 - (positions[did] - 1) / n_ranked))
            else:
                percentiles.append(0.0)
        pq["mpr"] = sum(percentiles) / len(percentiles)
        report.per_query[qid] = pq
    metric_names = next(iter(report.per_query.values())).keys()
    for name in metric_names:
        report.values[name] = sum(report.per_query[q][name] for q in qids) / len(qids)
    return report


def paired_t_test(per_query_a: list[float], per_query_b: list[float],
                  alpha: float = 0.05,
                  m_corrections: int = 1) -> tuple[float, float, bool]:
    """Two-sided paired t-test with Bonferroni-adjusted significance.

    Degenerate difference lists are handled explicitly: zero variance with
    zero mean reports t=0, p=1; zero variance with nonzero mean reports an
    infinite t and p=0.
    """
    if len(per_query_a) != len(per_query_b):
        raise ValueError("paired samples must have equal length")
    if len(per_query_a) < 2:
        raise ValueError("need at least two pairs")
    diffs = [a - b for a, b in zip(per_query_a, per_query_b)]
    mean = sum(diffs) / len(diffs)
    var = sum((d - mean) ** 2 for d in diffs)
    if var == 0.0:
        if mean == 0.0:
            t, p = 0.0, 1.0
        else:
            t, p = math.copysign(math.inf, mean), 0.0
    else:
        t, p = stats.ttest_rel(per_query_a, per_query_b)
        t, p = float(t), float(p)
    return (t, p, p < alpha / m_corrections)
