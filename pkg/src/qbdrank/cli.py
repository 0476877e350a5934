"""Command-line pipeline: composable subcommands over one JSON config.

Every config field can be overridden with a flag of the same dotted name
(e.g. ``--prs.k1 2.8`` or ``--paths.corpus docs.jsonl``). Each command
writes its artifact into the workdir and prints a one-line summary.
Exit codes: 0 ok, 2 config error, 3 data error, 4 internal error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from . import analysis, baselines, lexical, tune
from .corpus import load_corpus, load_qrels
from .embed import ingest, stub_embed, write_store
from .errors import ConfigError, DataError
from .evaluation import rank_metrics, read_run, set_metrics, write_run
from .pipeline import (PipelineConfig, build_config, first_stage_run,
                       rerank_run, segment_collection)
from .rprs import PRS_PRESETS, PrsParams

PATH_KEYS = ("corpus", "queries", "qrels", "vectors", "manifest", "workdir",
             "index", "run", "first_stage_run")

CONFIG_KEYS = (
    "seed", "dim", "max_sentence_words", "bm25_k1", "bm25_b", "kli_fraction",
    "first_stage_depth", "depth", "objective",
    "prs.n", "prs.k1", "prs.b", "prs.use_freq", "prs.use_qp", "prs.use_dp",
    "prs.use_min",
)


def _params_tag(method: str, payload: dict) -> str:
    digest = hashlib.blake2b(
        json.dumps(payload, sort_keys=True).encode(), digest_size=4
    ).hexdigest()
    return f"{method}:{digest}"


class CliContext:
    """Resolved config + paths for one command invocation."""

    def __init__(self, args: argparse.Namespace):
        raw: dict = {}
        if args.config:
            try:
                raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        for dotted in CONFIG_KEYS + tuple(f"paths.{k}" for k in PATH_KEYS):
            value = getattr(args, dotted.replace(".", "__"), None)
            if value is None:
                continue
            node = raw
            *parents, leaf = dotted.split(".")
            for part in parents:
                node = node.setdefault(part, {})
            node[leaf] = value
        self.paths = {k: str(v) for k, v in raw.pop("paths", {}).items()}
        self.config = build_config(raw)
        self.workdir = Path(self.paths.get("workdir", "."))
        self.workdir.mkdir(parents=True, exist_ok=True)

    def path(self, key: str, required: bool = True) -> Path | None:
        value = self.paths.get(key)
        if value is None:
            if required:
                raise ConfigError(f"missing required path: paths.{key}")
            return None
        return Path(value)

    def require_existing(self, *keys: str) -> list[Path]:
        problems = []
        resolved = []
        for key in keys:
            p = self.path(key)
            resolved.append(p)
            if p is not None and not p.exists():
                problems.append(f"paths.{key}: {p} does not exist")
        if problems:
            raise ConfigError("invalid configuration:\n  " + "\n  ".join(problems))
        return resolved


def _load_segmented(path: Path, config: PipelineConfig,
                    unit_tokens: int | None = None,
                    max_tokens: int | None = None):
    raw = load_corpus(path)
    return segment_collection(raw, config.max_sentence_words, unit_tokens, max_tokens)


def cmd_segment(ctx: CliContext, args) -> str:
    (corpus_path,) = ctx.require_existing("corpus")
    docs = _load_segmented(corpus_path, ctx.config)
    out = ctx.workdir / "segmented.jsonl"
    with open(out, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps({
                "id": doc.id, "sentences": list(doc.sentences),
                "paragraph_bounds": [list(b) for b in doc.paragraph_bounds],
                "token_count": doc.token_count,
            }) + "\n")
    return f"segment: {len(docs)} docs -> {out}"


def cmd_index(ctx: CliContext, args) -> str:
    (corpus_path,) = ctx.require_existing("corpus")
    docs = _load_segmented(corpus_path, ctx.config)
    index = lexical.build_index(docs)
    out = ctx.workdir / "index.bin"
    lexical.save_index(index, out)
    return f"index: {index.n_docs} docs, {len(index.postings)} terms -> {out}"


def cmd_ingest_embeddings(ctx: CliContext, args) -> str:
    vectors, manifest = ctx.require_existing("vectors", "manifest")
    store = ingest(vectors, manifest)
    return f"ingest-embeddings: {len(store)} rows, dim={store.dim}, {len(store.index)} docs"


def cmd_stub_embed(ctx: CliContext, args) -> str:
    corpus_path, queries_path = ctx.require_existing("corpus", "queries")
    docs = _load_segmented(corpus_path, ctx.config)
    queries = _load_segmented(queries_path, ctx.config)
    store = stub_embed(docs + queries, ctx.config.dim, ctx.config.seed)
    vectors = ctx.workdir / "vectors.seb"
    manifest = ctx.workdir / "manifest.jsonl"
    write_store(store.rows, store.manifest, vectors, manifest)
    return f"stub-embed: {len(store)} rows dim={store.dim} -> {vectors}"


def cmd_retrieve(ctx: CliContext, args) -> str:
    corpus_path, queries_path = ctx.require_existing("corpus", "queries")
    docs = _load_segmented(corpus_path, ctx.config)
    queries = _load_segmented(queries_path, ctx.config)
    index = lexical.build_index(docs)
    run = first_stage_run(index, queries, ctx.config.bm25_params(),
                          ctx.config.first_stage_depth, ctx.config.kli_fraction)
    out = ctx.workdir / "first_stage.run"
    tag = _params_tag("bm25", {"k1": ctx.config.bm25_k1, "b": ctx.config.bm25_b,
                               "kli": ctx.config.kli_fraction})
    write_run(run, out, tag=tag)
    return f"retrieve: {len(run)} queries -> {out}"


def _resolve_store(ctx: CliContext):
    vectors = ctx.path("vectors", required=False)
    manifest = ctx.path("manifest", required=False)
    if vectors and manifest:
        return ingest(vectors, manifest)
    corpus_path, queries_path = ctx.require_existing("corpus", "queries")
    docs = _load_segmented(corpus_path, ctx.config)
    queries = _load_segmented(queries_path, ctx.config)
    return stub_embed(docs + queries, ctx.config.dim, ctx.config.seed)


def cmd_rerank(ctx: CliContext, args) -> str:
    corpus_path, queries_path = ctx.require_existing("corpus", "queries")
    (fs_path,) = ctx.require_existing("first_stage_run")
    docs = _load_segmented(corpus_path, ctx.config)
    queries = _load_segmented(queries_path, ctx.config)
    store = _resolve_store(ctx)
    fs_run = read_run(fs_path)
    prs = ctx.config.prs
    if args.preset:
        prs = PrsParams.preset(args.preset, use_freq=args.method != "rprs")
    depth = PRS_PRESETS[args.preset]["depth"] if args.preset else ctx.config.depth
    method = args.method
    if method in ("rprs", "rprs-freq"):
        if method == "rprs" and prs.use_freq:
            prs = PrsParams(n=prs.n, k1=prs.k1, b=prs.b, use_freq=False,
                            use_qp=prs.use_qp, use_dp=prs.use_dp, use_min=prs.use_min)
        if method == "rprs-freq" and not prs.use_freq:
            prs = PrsParams(n=prs.n, k1=prs.k1, b=prs.b, use_freq=True,
                            use_qp=prs.use_qp, use_dp=prs.use_dp, use_min=prs.use_min)
        run = rerank_run(queries, fs_run, store, prs, depth)
        tag = _params_tag(method, {"n": prs.n, "k1": prs.k1, "b": prs.b, "depth": depth})
    elif method in ("sdr", "birch"):
        by_id = {d.id: d for d in docs}
        run = {}
        for query in queries:
            entries = fs_run.get(query.id, [])[:depth]
            cands = [by_id[d] for d, _s in entries if d in by_id and d != query.id]
            if method == "sdr":
                scored = baselines.sdr_score(query, cands, store) if cands else []
                run[query.id] = [(s.doc_id, s.total) for s in scored]
            else:
                fs_scores = {d: s for d, s in entries}
                run[query.id] = baselines.birch_score(query, cands, fs_scores, store) \
                    if cands else []
        tag = _params_tag(method, {"depth": depth})
    else:
        raise ConfigError(f"unknown rerank method {method!r}")
    out = ctx.workdir / f"{method}.run"
    write_run(run, out, tag=tag)
    return f"rerank[{method}]: {len(run)} queries -> {out}"


def cmd_evaluate(ctx: CliContext, args) -> str:
    run_path, qrels_path = ctx.require_existing("run", "qrels")
    run = read_run(run_path)
    qrels = load_qrels(qrels_path)
    obj = ctx.config.objective
    p, r, f1 = set_metrics(run, qrels, obj.cutoff)
    report = rank_metrics(run, qrels, cutoffs=(obj.cutoff, 10))
    report.values[f"precision@{obj.cutoff}"] = p
    report.values[f"recall_set@{obj.cutoff}"] = r
    report.values[f"f1@{obj.cutoff}"] = f1
    out = ctx.workdir / "metrics.json"
    out.write_text(report.to_json() + "\n", encoding="utf-8")
    report.write_per_query_csv(ctx.workdir / "metrics_per_query.csv")
    return f"evaluate: f1@{obj.cutoff}={f1:.4f} map@{obj.cutoff}={report.values[f'map@{obj.cutoff}']:.4f} -> {out}"


def cmd_tune(ctx: CliContext, args) -> str:
    corpus_path, queries_path = ctx.require_existing("corpus", "queries")
    (qrels_path,) = ctx.require_existing("qrels")
    (fs_path,) = ctx.require_existing("first_stage_run")
    queries = _load_segmented(queries_path, ctx.config)
    store = _resolve_store(ctx)
    qrels = load_qrels(qrels_path)
    fs_run = read_run(fs_path)
    fs_ids = {qid: [d for d, _s in entries] for qid, entries in fs_run.items()}
    grid = tune.GridSpec(objective=ctx.config.objective)
    if args.small_grid:
        grid = tune.GridSpec(n_values=(1, 2, 4), b_values=(0.0, 0.5, 1.0),
                             k1_values=(0.0, 1.2, 2.8), objective=ctx.config.objective)
    best, table = tune.grid_search(queries, fs_ids, ctx.config.depth, store, qrels, grid)
    best_value = max(v for _p, v in table)
    tune.save_preset(ctx.workdir / "preset.json", args.dataset, best,
                     ctx.config.depth, grid.objective, best_value)
    tune.write_sensitivity_csv(table, ctx.workdir / "sensitivity.csv", grid.objective)
    return (f"tune: best n={best.n} k1={best.k1} b={best.b} "
            f"{grid.objective}={best_value:.4f} -> {ctx.workdir / 'preset.json'}")


def cmd_sweep(ctx: CliContext, args) -> str:
    corpus_path, queries_path = ctx.require_existing("corpus", "queries")
    (qrels_path,) = ctx.require_existing("qrels")
    docs = load_corpus(corpus_path)
    queries = load_corpus(queries_path)
    qrels = load_qrels(qrels_path)
    values = [int(v) for v in args.values.split(",")] if args.values else None
    if args.kind == "truncation":
        rows = analysis.truncation_sweep(
            queries, docs, qrels, values or [256, 512, 1024], ctx.config)
    elif args.kind == "unit":
        rows = analysis.unit_size_sweep(
            queries, docs, qrels, values or [16, 32, 64], ctx.config)
    else:
        raise ConfigError(f"unknown sweep kind {args.kind!r}")
    out = ctx.workdir / f"sweep_{args.kind}.csv"
    analysis.write_sweep_csv(rows, str(ctx.config.objective), out)
    return f"sweep[{args.kind}]: {len(rows)} rows -> {out}"


def cmd_analyze(ctx: CliContext, args) -> str:
    run_path, qrels_path = ctx.require_existing("run", "qrels")
    (corpus_path,) = ctx.require_existing("corpus")
    run = read_run(run_path)
    qrels = load_qrels(qrels_path)
    docs = load_corpus(corpus_path)
    lengths = {d.id: len(d.text.split()) for d in docs}
    r = analysis.length_score_correlation(run, lengths)
    analysis.write_correlation_csv(
        [(args.model_label, args.dataset, r)], ctx.workdir / "correlation.csv")
    bins = analysis.retrieval_probability_by_length(
        run, qrels, lengths, k=ctx.config.objective.cutoff)
    analysis.write_bins_csv(bins, ctx.workdir / "bins.csv")
    return f"analyze: pearson r={r:.4f} -> {ctx.workdir / 'correlation.csv'}"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qbdrank",
        description="Query-by-document retrieval pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser):
        p.add_argument("--config", help="JSON config file")
        for dotted in CONFIG_KEYS + tuple(f"paths.{k}" for k in PATH_KEYS):
            p.add_argument(f"--{dotted}", dest=dotted.replace(".", "__"),
                           metavar="VALUE")

    for name, fn in (("segment", cmd_segment), ("index", cmd_index),
                     ("ingest-embeddings", cmd_ingest_embeddings),
                     ("stub-embed", cmd_stub_embed), ("retrieve", cmd_retrieve)):
        p = sub.add_parser(name)
        add_common(p)
        p.set_defaults(fn=fn)

    p = sub.add_parser("rerank")
    add_common(p)
    p.add_argument("--method", choices=["rprs", "rprs-freq", "sdr", "birch"],
                   default="rprs-freq")
    p.add_argument("--preset", choices=sorted(PRS_PRESETS))
    p.set_defaults(fn=cmd_rerank)

    p = sub.add_parser("evaluate")
    add_common(p)
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("tune")
    add_common(p)
    p.add_argument("--dataset", default="dataset")
    p.add_argument("--small-grid", action="store_true",
                   help="use a reduced grid (quick smoke runs)")
    p.set_defaults(fn=cmd_tune)

    p = sub.add_parser("sweep")
    add_common(p)
    p.add_argument("--kind", choices=["truncation", "unit"], required=True)
    p.add_argument("--values", help="comma-separated sweep points")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("analyze")
    add_common(p)
    p.add_argument("--model-label", default="model")
    p.add_argument("--dataset", default="dataset")
    p.set_defaults(fn=cmd_analyze)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        ctx = CliContext(args)
        summary = args.fn(ctx, args)
    except ConfigError as exc:
        print(json.dumps({"error": "config", "detail": str(exc)}), file=sys.stderr)
        return 2
    except DataError as exc:
        print(json.dumps({"error": "data", "detail": str(exc)}), file=sys.stderr)
        return 3
    except Exception as exc:  # internal invariant violation
        print(json.dumps({"error": "internal", "detail": f"{type(exc).__name__}: {exc}"}),
              file=sys.stderr)
        return 4
    print(summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
