"""End-to-end orchestration: segment, embed, retrieve, re-rank, evaluate.

Used by the CLI subcommands and by the analysis sweeps, which re-run the
whole pipeline under varied segmentation settings. With a fixed seed the
pipeline is fully deterministic.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .corpus import (Qrels, RawDocument, SegmentedDocument, segment,
                     segment_fixed_length, truncate)
from .embed import EmbeddingStore, stub_embed
from .errors import ConfigError
from .evaluation import Run
from .lexical import Bm25Params, InvertedIndex, bm25_search, build_index, kli_reduce
from .rprs import PrsParams, rerank
from .tune import Objective, objective_value


@dataclass(frozen=True)
class PipelineConfig:
    """One knob surface for a full retrieve-rerank-evaluate run."""

    seed: int = 7
    dim: int = 64
    max_sentence_words: int = 25
    bm25_k1: float = 1.2
    bm25_b: float = 0.75
    kli_fraction: float = 0.0  # 0 disables KLI query reduction
    first_stage_depth: int = 200
    depth: int = 50
    prs: PrsParams = field(default_factory=PrsParams)
    objective: Objective = field(default_factory=Objective)

    def bm25_params(self) -> Bm25Params:
        return Bm25Params(k1=self.bm25_k1, b=self.bm25_b)


def segment_collection(docs: list[RawDocument], max_sentence_words: int = 25,
                       unit_tokens: int | None = None,
                       max_tokens: int | None = None) -> list[SegmentedDocument]:
    """Segment every document, optionally with fixed-length units and/or
    truncation to a token budget."""
    out = []
    for doc in docs:
        seg = (segment_fixed_length(doc, unit_tokens) if unit_tokens
               else segment(doc, max_sentence_words))
        if max_tokens is not None:
            seg = truncate(seg, max_tokens)
        out.append(seg)
    return out


def first_stage_run(index: InvertedIndex, queries: list[SegmentedDocument],
                    params: Bm25Params, depth: int,
                    kli_fraction: float = 0.0) -> Run:
    run: Run = {}
    for query in queries:
        query_terms = None
        if kli_fraction > 0.0:
            query_terms = kli_reduce(index, query, kli_fraction)
        run[query.id] = bm25_search(index, params, query, depth, query_terms=query_terms)
    return run


def rerank_run(queries: list[SegmentedDocument], first_stage: Run,
               store: EmbeddingStore, params: PrsParams, depth: int) -> Run:
    run: Run = {}
    for query in queries:
        candidates = [d for d, _s in first_stage.get(query.id, [])]
        breakdowns = rerank(query, candidates, depth, store, params)
        run[query.id] = [(b.doc_id, b.score) for b in breakdowns]
    return run


def run_pipeline(docs: list[RawDocument], queries: list[RawDocument],
                 qrels: Qrels, config: PipelineConfig,
                 unit_tokens: int | None = None,
                 max_tokens: int | None = None) -> tuple[Run, float]:
    """Full synthetic-friendly pipeline using the stub embedder.

    Returns the re-ranked run and the configured objective value.
    """
    seg_docs = segment_collection(docs, config.max_sentence_words, unit_tokens, max_tokens)
    seg_queries = segment_collection(queries, config.max_sentence_words,
                                     unit_tokens, max_tokens)
    index = build_index(seg_docs)
    store = stub_embed(seg_docs + seg_queries, config.dim, config.seed)
    fs_run = first_stage_run(index, seg_queries, config.bm25_params(),
                             config.first_stage_depth, config.kli_fraction)
    run = rerank_run(seg_queries, fs_run, store, config.prs, config.depth)
    return run, objective_value(run, qrels, config.objective)


def load_config(path: str | Path, overrides: dict[str, str] | None = None) -> PipelineConfig:
    """Build a PipelineConfig from JSON, applying dotted-name overrides.

    Top-level keys mirror PipelineConfig fields; the nested scorer params
    live under "prs" (e.g. override "prs.k1"). Every violation is
    collected so configuration errors are reported all at once.
    """
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if overrides:
        for dotted, value in overrides.items():
            node = raw
            *parents, leaf = dotted.split(".")
            for part in parents:
                node = node.setdefault(part, {})
            node[leaf] = value
    return build_config(raw)


def build_config(raw: dict) -> PipelineConfig:
    errors: list[str] = []
    known = {f.name: f for f in fields(PipelineConfig)}
    kwargs: dict = {}
    for key, value in raw.items():
        if key == "objective":
            try:
                kwargs["objective"] = Objective.parse(str(value))
            except (ValueError, TypeError) as exc:
                errors.append(f"objective: {exc}")
        elif key == "prs":
            if not isinstance(value, dict):
                errors.append("prs: must be an object")
                continue
            try:
                kwargs["prs"] = _coerce_dataclass(PrsParams, value)
            except (ValueError, TypeError) as exc:
                errors.append(f"prs: {exc}")
        elif key in known:
            try:
                kwargs[key] = _coerce(known[key].type, value)
            except (ValueError, TypeError) as exc:
                errors.append(f"{key}: {exc}")
        else:
            errors.append(f"unknown config key {key!r}")
    if errors:
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(errors))
    return PipelineConfig(**kwargs)


def _coerce(type_name, value):
    target = type_name if isinstance(type_name, str) else type_name.__name__
    if target == "int":
        return int(value)
    if target == "float":
        return float(value)
    return value


def _coerce_dataclass(cls, raw: dict):
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in raw.items():
        if key not in known:
            raise ValueError(f"unknown key {key!r}")
        if key.startswith("use_"):
            if isinstance(value, str):
                value = value.lower() in ("1", "true", "yes")
            kwargs[key] = bool(value)
        else:
            kwargs[key] = _coerce(known[key].type, value)
    return cls(**kwargs)
