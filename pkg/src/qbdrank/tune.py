"""Parameter grid search and re-ranking depth sweep.

The grid search computes each query's neighbor lists once, at the largest
n in the grid, and reuses them for every (n, k1, b) combination: the
top-n lists for smaller n are prefixes of the widest list, and the
saturation parameters only touch the cheap aggregation step.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import Qrels, SegmentedDocument
from .embed import EmbeddingStore
from .errors import ConfigError, DataError
from .evaluation import (Run, _average_precision, _ndcg, rank_metrics,
                         set_metrics)
from .rprs import PooledScorer, PrsParams, build_pool, neighbors, rerank

DEFAULT_N_VALUES = tuple(range(1, 11))
DEFAULT_B_VALUES = tuple(round(0.1 * i, 1) for i in range(11))
DEFAULT_K1_VALUES = tuple(round(0.2 * i, 1) for i in range(16))


@dataclass(frozen=True)
class Objective:
    """Metric to maximize, e.g. f1@5 or map@10."""

    metric: str = "f1"
    cutoff: int = 5

    @classmethod
    def parse(cls, spec: str) -> "Objective":
        if "@" in spec:
            name, _, cut = spec.partition("@")
            return cls(metric=name, cutoff=int(cut))
        return cls(metric=spec, cutoff=5)

    def __str__(self) -> str:
        return f"{self.metric}@{self.cutoff}"


@dataclass(frozen=True)
class GridSpec:
    n_values: tuple[int, ...] = DEFAULT_N_VALUES
    b_values: tuple[float, ...] = DEFAULT_B_VALUES
    k1_values: tuple[float, ...] = DEFAULT_K1_VALUES
    objective: Objective = field(default_factory=Objective)

    def __post_init__(self):
        if not (self.n_values and self.b_values and self.k1_values):
            raise ConfigError("grid value lists must be non-empty")


def objective_value(run: Run, qrels: Qrels, objective: Objective) -> float:
    if objective.metric == "f1":
        return set_metrics(run, qrels, objective.cutoff)[2]
    if objective.metric == "precision":
        return set_metrics(run, qrels, objective.cutoff)[0]
    report = rank_metrics(run, qrels, cutoffs=(objective.cutoff,))
    key = objective.metric if objective.metric in ("mrr", "mpr") \
        else f"{objective.metric}@{objective.cutoff}"
    try:
        return report.values[key]
    except KeyError:
        raise ConfigError(f"unknown objective metric {objective.metric!r}") from None


def _objective_from_ranked(ranked_by_qid: dict[str, list[str]], qrels: Qrels,
                           objective: Objective,
                           qids: list[str] | None = None,
                           relevant_by_qid: dict[str, set[str]] | None = None) -> float:
    """objective_value on bare ranked doc-id lists.

    Mirrors the metric implementations step for step (same formulas, same
    per-query iteration and summation order) so a value computed here is
    bit-identical to evaluating a full run. qids/relevant_by_qid can be
    precomputed by callers in a tight loop.
    """
    if qids is None:
        qids = qrels.judged_query_ids()
    if relevant_by_qid is None:
        relevant_by_qid = {qid: qrels.relevant_docs(qid) for qid in qids}
    if not qids:
        return 0.0
    k = objective.cutoff
    if objective.metric in ("f1", "precision"):
        ps = []
        rs = []
        for qid in qids:
            relevant = relevant_by_qid[qid]
            hits = len(set(ranked_by_qid.get(qid, [])[:k]) & relevant)
            ps.append(hits / k)
            rs.append(hits / len(relevant))
        p = sum(ps) / len(ps)
        r = sum(rs) / len(rs)
        if objective.metric == "precision":
            return p
        return 2 * p * r / (p + r) if (p + r) > 0 else 0.0
    values = []
    for qid in qids:
        relevant = relevant_by_qid[qid]
        ranked = ranked_by_qid.get(qid, [])
        if objective.metric == "map":
            values.append(_average_precision(ranked, relevant, k))
        elif objective.metric == "ndcg":
            values.append(_ndcg(ranked, relevant, k))
        elif objective.metric == "recall":
            values.append(len(set(ranked[:k]) & relevant) / len(relevant))
        elif objective.metric == "p":
            values.append(len(set(ranked[:k]) & relevant) / k)
        elif objective.metric == "mrr":
            rr = 0.0
            for i, did in enumerate(ranked, start=1):
                if did in relevant:
                    rr = 1.0 / i
                    break
            values.append(rr)
        elif objective.metric == "mpr":
            n_ranked = len(ranked)
            positions = {d: i for i, d in enumerate(ranked, start=1)}
            percentiles = [
                100.0 * (1.0 - (positions[d] - 1) / n_ranked)
                if d in positions and n_ranked > 0 else 0.0
                for d in relevant
            ]
            values.append(sum(percentiles) / len(percentiles))
        else:
            raise ConfigError(f"unknown objective metric {objective.metric!r}")
    return sum(values) / len(qids)


def grid_search(queries: list[SegmentedDocument],
                first_stage_runs: dict[str, list[str]],
                depth: int, store: EmbeddingStore, qrels: Qrels,
                grid: GridSpec = GridSpec()) -> tuple[PrsParams, list[tuple[PrsParams, float]]]:
    """Exhaustive search over (n, k1, b) for the frequency-saturated scorer.

    Returns the best parameters (ties go to smaller n, then k1, then b)
    and the full (params, objective) table for sensitivity analysis.
    """
    missing = [q.id for q in queries if q.id not in first_stage_runs]
    if missing:
        raise DataError(f"missing first-stage runs for queries {missing}")
    n_max = max(grid.n_values)
    scorers: dict[str, PooledScorer] = {}
    # per query: candidate ids (re-ranked block + zero-scored tail) and the
    # zero padding for the tail, so each cell is an argsort over one array
    cand_ids: dict[str, list[str]] = {}
    tail_zeros: dict[str, np.ndarray] = {}
    for query in queries:
        first_stage = [d for d in first_stage_runs[query.id] if d != query.id]
        pool = build_pool(query, first_stage, depth, store)
        nb = neighbors(query, pool, store, n_max)
        scorers[query.id] = PooledScorer(query, pool, nb)
        cand_ids[query.id] = pool.candidates + first_stage[len(pool.candidates):]
        tail_zeros[query.id] = np.zeros(len(first_stage) - len(pool.candidates))
    qids = qrels.judged_query_ids()
    relevant_by_qid = {qid: qrels.relevant_docs(qid) for qid in qids}
    # cutoff metrics only look at the head of each ranking; mrr/mpr need it all
    head = None if grid.objective.metric in ("mrr", "mpr") else grid.objective.cutoff
    table: list[tuple[PrsParams, float]] = []
    best: tuple[float, int, float, float] | None = None
    best_params: PrsParams | None = None
    k1_arr = np.array(grid.k1_values, dtype=np.float64)
    b_arr = np.array(grid.b_values, dtype=np.float64)
    cells = [(k1, b) for k1 in grid.k1_values for b in grid.b_values]
    for n in grid.n_values:
        # one broadcast pass per (query, n) covers every (k1, b) cell
        matrices = {
            q.id: scorers[q.id].score_matrix(n, k1_arr, b_arr) for q in queries
        }
        for ci, (k1, b) in enumerate(cells):
            params = PrsParams(n=n, k1=k1, b=b, use_freq=True)
            ranked_by_qid: dict[str, list[str]] = {}
            for query in queries:
                scores = np.concatenate(
                    [matrices[query.id][ci], tail_zeros[query.id]]
                )
                # stable argsort on -score = ties broken by first-stage rank
                order = np.argsort(-scores, kind="stable")
                if head is not None:
                    order = order[:head]
                ids = cand_ids[query.id]
                ranked_by_qid[query.id] = [ids[i] for i in order]
            value = _objective_from_ranked(ranked_by_qid, qrels, grid.objective,
                                           qids, relevant_by_qid)
            table.append((params, value))
            key = (-value, n, k1, b)
            if best is None or key < best:
                best = key
                best_params = params
    assert best_params is not None
    return best_params, table


def depth_sweep(queries: list[SegmentedDocument],
                first_stage_runs: dict[str, list[str]],
                store: EmbeddingStore, params: PrsParams, depths: list[int],
                qrels: Qrels,
                objective: Objective = Objective()) -> tuple[int, list[tuple[int, float]]]:
    """Objective per re-ranking depth; best by max, ties to smaller depth."""
    if not depths or sorted(depths) != list(depths):
        raise ConfigError("depths must be non-empty and sorted ascending")
    missing = [q.id for q in queries if q.id not in first_stage_runs]
    if missing:
        raise DataError(f"missing first-stage runs for queries {missing}")
    table: list[tuple[int, float]] = []
    for depth in depths:
        run: Run = {}
        for query in queries:
            ranked = rerank(query, first_stage_runs[query.id], depth, store, params)
            run[query.id] = [(b.doc_id, b.score) for b in ranked]
        table.append((depth, objective_value(run, qrels, objective)))
    best_depth = max(table, key=lambda dv: (dv[1], -dv[0]))[0]
    return best_depth, table


def save_preset(path: str | Path, dataset: str, params: PrsParams, depth: int,
                objective: Objective, value: float) -> None:
    payload = {
        "dataset": dataset, "n": params.n, "k1": params.k1, "b": params.b,
        "depth": depth, "objective": str(objective), "value": value,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_sensitivity_csv(table: list[tuple[PrsParams, float]], path: str | Path,
                          objective: Objective) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "k1", "b", str(objective)])
        for params, value in table:
            writer.writerow([params.n, params.k1, params.b, f"{value:.6f}"])
