"""Command-line surface.

Subcommands: index, hints, retrieve, rerank, pipeline, eval, coverage, bench.
Errors exit non-zero (usage 2, data 3, backend 4) after printing one
machine-parseable JSON record on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .corpus import RelevanceLabel, load_judgments, load_products, load_queries
from .errors import BackendError, DataError, HintrankError, UsageError
from .evaluation import (
    PositiveSetConfig,
    breakdown_by,
    coverage_analysis,
    evaluate_run,
    render_coverage_table,
    render_latency_table,
    render_metric_table,
    save_report_records,
    stage_latency_stats,
)
from .hintgen import HintCache, gen_hints, make_provider
from .pipeline import (
    PipelineConfig,
    load_config,
    load_resources,
    rerank_run,
    run_pipeline,
    save_artifact,
)
from .retrieval import load_run, save_run
from .textindex import build_index, save_index

POSITIVE_SETS = {
    "rb": frozenset({RelevanceLabel.RELEVANT_AND_BEST}),
    "rb+rnb": frozenset({RelevanceLabel.RELEVANT_AND_BEST, RelevanceLabel.RELEVANT_NOT_BEST}),
    "all": frozenset(RelevanceLabel),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2) with plain text
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="hintrank")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", help="build an index snapshot from a products file")
    p.add_argument("--products", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("hints", help="generate hints for every query into a cache file")
    p.add_argument("--config", required=True)
    p.add_argument("--cache", help="override the cache path from the config")

    p = sub.add_parser("retrieve", help="first-stage retrieval into a run file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("rerank", help="rerank an existing run file")
    p.add_argument("--config", required=True)
    p.add_argument("--run", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("pipeline", help="full run: retrieve, hints, rerank, artifacts")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("eval", help="score a run file against judgments")
    p.add_argument("--run", required=True)
    p.add_argument("--judgments", required=True)
    p.add_argument("--positive", choices=sorted(POSITIVE_SETS), default="rb")
    p.add_argument("--depth", type=int, default=50)
    p.add_argument("--metrics", help="comma-separated subset of p@1,p@3,p@5,p@10,map,mrr")
    p.add_argument("--group-by", choices=["parent_category", "n_relevant"])
    p.add_argument("--queries", help="query metadata (needed for category grouping)")
    p.add_argument("--records", help="also write machine-readable report records here")

    p = sub.add_parser("coverage", help="per-variant candidate pool coverage table")
    p.add_argument("--config", required=True)
    p.add_argument("--ks", required=True, help="comma-separated ascending cutoffs")

    p = sub.add_parser("bench", help="repeat the pipeline and report latency stats")
    p.add_argument("--config", required=True)
    p.add_argument("--repeat", type=int, default=1)

    return parser


def cli_dispatch(argv: list[str]) -> int:
    try:
        args = _build_parser().parse_args(argv)
        return _run_command(args)
    except UsageError as e:
        _emit_error("usage", e)
        return 2
    except BackendError as e:
        _emit_error("backend", e)
        return 4
    except (DataError, OSError) as e:
        _emit_error("data", e)
        return 3
    except HintrankError as e:
        _emit_error("data", e)
        return 3


def _emit_error(kind: str, e: Exception) -> None:
    record = {"error": kind, "type": type(e).__name__, "message": str(e)}
    print(json.dumps(record), file=sys.stderr)


def _run_command(args) -> int:
    if args.command == "index":
        store = load_products(args.products)
        save_index(build_index(store), args.out)
        print(f"indexed {len(store)} products -> {args.out}")
        return 0

    if args.command == "hints":
        cfg = load_config(args.config)
        queries = load_queries(cfg.queries_path)
        cache_path = args.cache or cfg.cache_path
        if not cache_path:
            raise UsageError("no cache path given (config [hintgen] cache or --cache)")
        cache = HintCache(cache_path)
        provider = make_provider(cfg.provider)
        for q in queries:
            gen_hints(q, provider, cache, cfg.num_coverage_queries)
        print(f"cache holds {len(cache)} hint sets -> {cache_path}")
        return 0

    if args.command == "retrieve":
        cfg = load_config(args.config)
        cfg = _replace(cfg, reranker="none")
        artifact = run_pipeline(cfg)
        save_run(artifact.rankings, args.out)
        _print_failures(artifact)
        print(f"retrieved {len(artifact.rankings)} rankings -> {args.out}")
        return 0

    if args.command == "rerank":
        cfg = load_config(args.config)
        if cfg.reranker == "none":
            raise UsageError("config [rerank] reranker must not be 'none' for rerank")
        artifact = rerank_run(cfg, load_run(args.run))
        save_run(artifact.rankings, args.out)
        _print_failures(artifact)
        print(f"reranked {len(artifact.rankings)} rankings -> {args.out}")
        return 0

    if args.command == "pipeline":
        cfg = load_config(args.config)
        artifact = run_pipeline(cfg)
        save_artifact(artifact, args.out_dir)
        _print_failures(artifact)
        print(
            f"{len(artifact.rankings)} rankings, {len(artifact.failures)} failures "
            f"-> {args.out_dir}"
        )
        return 0

    if args.command == "eval":
        run = load_run(args.run)
        judgments = load_judgments(args.judgments)
        cfg = PositiveSetConfig(POSITIVE_SETS[args.positive])
        metrics = args.metrics.split(",") if args.metrics else None
        if args.group_by:
            queries = load_queries(args.queries) if args.queries else None
            groups = breakdown_by(run, judgments, args.group_by, queries, cfg, args.depth)
            rows = [
                (f"{g.group} (n={g.report.n_queries})", g.report)
                for g in groups
                if not g.flagged
            ]
            flagged = [g.group for g in groups if g.flagged]
            print(render_metric_table(rows, metrics))
            if flagged:
                print(f"dropped groups with <10 queries: {', '.join(flagged)}")
            if args.records:
                save_report_records(rows, args.records)
        else:
            report = evaluate_run(run, judgments, cfg, args.depth)
            print(render_metric_table([("run", report)], metrics))
            if args.records:
                save_report_records([("run", report)], args.records)
        return 0

    if args.command == "coverage":
        cfg = load_config(args.config)
        ks = [int(v) for v in args.ks.split(",")]
        rows = _coverage_rows(cfg, ks)
        print(render_coverage_table(rows))
        return 0

    if args.command == "bench":
        cfg = load_config(args.config)
        if args.repeat < 1:
            raise UsageError("--repeat must be >= 1")
        samples = []
        for _ in range(args.repeat):
            artifact = run_pipeline(cfg)
            samples.extend(artifact.latencies)
        if not samples:
            raise DataError("no successful queries to benchmark")
        print(render_latency_table(stage_latency_stats(samples)))
        return 0

    raise UsageError(f"unknown command: {args.command}")


def _coverage_rows(cfg: PipelineConfig, ks: list[int]):
    from .hintgen import gen_hints as _gen_hints
    from .retrieval import build_variants
    from .textindex import bm25_topk, tokenize

    resources = load_resources(_replace(cfg, retriever="qe_bm25"))
    if resources.judgments is None:
        raise UsageError("coverage requires [corpus] judgments")
    depth = max(ks)
    pools = {}
    for q in resources.queries:
        hints = _gen_hints(q, resources.provider, resources.cache, cfg.num_coverage_queries)
        variant_docs = []
        for variant in build_variants(q, hints, cfg.qe):
            tokens = tokenize(variant)
            if not tokens:
                continue
            hits = bm25_topk(resources.index, tokens, k=depth, max_candidates=depth)
            variant_docs.append([e.doc_id for e in hits])
        pools[q.id] = variant_docs
    return coverage_analysis(pools, resources.judgments, ks)


def _replace(cfg: PipelineConfig, **changes) -> PipelineConfig:
    import dataclasses

    return dataclasses.replace(cfg, **changes)


def _print_failures(artifact) -> None:
    for failure in artifact.failures:
        print(
            json.dumps({"query_id": failure.query_id, "error": failure.error}),
            file=sys.stderr,
        )


def main() -> None:
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
