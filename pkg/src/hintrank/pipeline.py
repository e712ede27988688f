"""End-to-end orchestration: hints and retrieval in parallel, then rerank.

Per query, hint generation and first-stage retrieval start together and are
joined before enrichment and reranking -- except for the qe_bm25 retriever,
whose variants are derived from the hints, forcing hints-then-retrieve.
Queries are processed by a bounded worker pool; shared stores are read-only
during a run and the hint cache serializes its appends internally.

Latency accounting: the "hints" stage records only the time the query spent
blocked on hints beyond retrieval (the join wait), so stage sums never
exceed the measured total even when the stages overlap.

Config file: INI sections [corpus], [hintgen], [retrieval], [rerank],
[pipeline]; see load_config for every key.
"""

from __future__ import annotations

import configparser
import json
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

from .corpus import (
    EmbeddingStore,
    JudgmentSet,
    ProductStore,
    SuperlativeQuery,
    load_embeddings,
    load_judgments,
    load_products,
    load_queries,
)
from .errors import DataError, HintrankError, UsageError
from .evaluation import LatencySample
from .hintgen import HintCache, ProviderConfig, TextProvider, gen_hints, make_provider
from .hints import EnrichMode, HintSet
from .rerank import (
    ChunkStrategy,
    HttpScorer,
    LexicalScorer,
    ScorerBackend,
    listwise_rerank,
    pointwise_rerank,
)
from .retrieval import (
    QEConfig,
    RankedList,
    build_variants,
    retrieve_bm25,
    retrieve_dense,
    retrieve_qe_bm25,
    save_run,
)
from .textindex import InvertedIndex, build_index, load_index

RETRIEVERS = ("bm25", "qe_bm25", "dense")
RERANKERS = ("none", "pointwise", "listwise")
SCORERS = ("lexical", "http")


@dataclass(frozen=True)
class PipelineConfig:
    retriever: str = "bm25"
    reranker: str = "none"
    scorer: str = "lexical"
    enrichment: EnrichMode = EnrichMode.COVERAGE_QUERY
    use_hints: bool = True
    k: int = 50
    qe: QEConfig = field(default_factory=QEConfig)
    num_coverage_queries: int = 10
    worker_count: int = 1
    seed: int = 0
    chunk_strategy: ChunkStrategy = ChunkStrategy.CONTIGUOUS
    provider: ProviderConfig = field(default_factory=ProviderConfig)
    scorer_endpoint: str | None = None
    scorer_timeout: float = 30.0
    products_path: str | None = None
    queries_path: str | None = None
    judgments_path: str | None = None
    embeddings_path: str | None = None
    query_embeddings_path: str | None = None
    index_path: str | None = None
    cache_path: str | None = None

    def __post_init__(self):
        if self.retriever not in RETRIEVERS:
            raise UsageError(f"retriever must be one of {RETRIEVERS}, got {self.retriever!r}")
        if self.reranker not in RERANKERS:
            raise UsageError(f"reranker must be one of {RERANKERS}, got {self.reranker!r}")
        if self.scorer not in SCORERS:
            raise UsageError(f"scorer must be one of {SCORERS}, got {self.scorer!r}")
        if self.worker_count < 1:
            raise UsageError(f"worker_count must be >= 1, got {self.worker_count}")
        if self.retriever == "dense" and not self.embeddings_path:
            raise UsageError("dense retriever requires an embeddings path")
        if self.retriever == "dense" and not self.query_embeddings_path:
            raise UsageError("dense retriever requires a query_embeddings path")
        if self.reranker != "none" and self.scorer == "http" and not self.scorer_endpoint:
            raise UsageError("http scorer requires an endpoint")
        if self.reranker == "listwise" and self.k > 50:
            raise UsageError(f"listwise rerank caps k at 50, got {self.k}")

    @property
    def needs_hints(self) -> bool:
        if self.retriever == "qe_bm25":
            return True
        return self.reranker == "pointwise" and self.use_hints

    @property
    def hints_before_retrieval(self) -> bool:
        return self.retriever == "qe_bm25"

    def snapshot(self) -> dict:
        return {
            "retriever": self.retriever,
            "reranker": self.reranker,
            "scorer": self.scorer,
            "enrichment": self.enrichment.value,
            "use_hints": self.use_hints,
            "k": self.k,
            "qe_max_candidates": self.qe.max_candidates,
            "qe_include_brand_variants": self.qe.include_brand_variants,
            "num_coverage_queries": self.num_coverage_queries,
            "worker_count": self.worker_count,
            "seed": self.seed,
            "chunk_strategy": self.chunk_strategy.value,
            "provider_kind": self.provider.kind,
            "provider_seed": self.provider.seed,
            "paths": {
                "products": self.products_path,
                "queries": self.queries_path,
                "judgments": self.judgments_path,
                "embeddings": self.embeddings_path,
                "query_embeddings": self.query_embeddings_path,
                "index": self.index_path,
                "cache": self.cache_path,
            },
        }


def load_config(path: str | Path) -> PipelineConfig:
    """Read the INI config; unknown sections or keys are rejected."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise UsageError(f"config file not found: {path}")
    known = {
        "corpus": {"products", "queries", "judgments", "embeddings", "query_embeddings"},
        "hintgen": {"provider", "seed", "cache", "endpoint", "api_key", "model",
                    "timeout_ms", "max_retries", "num_coverage_queries"},
        "retrieval": {"retriever", "k", "max_candidates", "include_brand_variants", "index"},
        "rerank": {"reranker", "scorer", "enrichment", "use_hints", "endpoint",
                   "timeout_ms", "chunk_strategy"},
        "pipeline": {"worker_count", "seed"},
    }
    for section in parser.sections():
        if section not in known:
            raise UsageError(f"unknown config section [{section}]")
        for key in parser[section]:
            if key not in known[section]:
                raise UsageError(f"unknown config key [{section}] {key}")

    def get(section: str, key: str, fallback=None):
        return parser.get(section, key, fallback=fallback)

    k = parser.getint("retrieval", "k", fallback=50)
    max_candidates = parser.getint("retrieval", "max_candidates", fallback=50_000)
    provider = ProviderConfig(
        kind=get("hintgen", "provider", "mock"),
        endpoint=get("hintgen", "endpoint"),
        api_key=get("hintgen", "api_key"),
        model=get("hintgen", "model", "default"),
        timeout=parser.getint("hintgen", "timeout_ms", fallback=30_000) / 1000.0,
        max_retries=parser.getint("hintgen", "max_retries", fallback=2),
        seed=parser.getint("hintgen", "seed", fallback=0),
    )
    try:
        enrichment = EnrichMode(get("rerank", "enrichment", "coverage_query"))
        chunk_strategy = ChunkStrategy(get("rerank", "chunk_strategy", "contiguous"))
    except ValueError as e:
        raise UsageError(str(e))
    return PipelineConfig(
        retriever=get("retrieval", "retriever", "bm25"),
        reranker=get("rerank", "reranker", "none"),
        scorer=get("rerank", "scorer", "lexical"),
        enrichment=enrichment,
        use_hints=parser.getboolean("rerank", "use_hints", fallback=True),
        k=k,
        qe=QEConfig(
            k=k,
            max_candidates=max_candidates,
            include_brand_variants=parser.getboolean(
                "retrieval", "include_brand_variants", fallback=True
            ),
        ),
        num_coverage_queries=parser.getint("hintgen", "num_coverage_queries", fallback=10),
        worker_count=parser.getint("pipeline", "worker_count", fallback=1),
        seed=parser.getint("pipeline", "seed", fallback=0),
        chunk_strategy=chunk_strategy,
        provider=provider,
        scorer_endpoint=get("rerank", "endpoint"),
        scorer_timeout=parser.getint("rerank", "timeout_ms", fallback=30_000) / 1000.0,
        products_path=get("corpus", "products"),
        queries_path=get("corpus", "queries"),
        judgments_path=get("corpus", "judgments"),
        embeddings_path=get("corpus", "embeddings"),
        query_embeddings_path=get("corpus", "query_embeddings"),
        index_path=get("retrieval", "index"),
        cache_path=get("hintgen", "cache"),
    )


@dataclass
class Resources:
    """Everything a run needs; build with load_resources or assemble by hand."""

    store: ProductStore
    queries: list[SuperlativeQuery]
    index: InvertedIndex | None = None
    embeddings: EmbeddingStore | None = None
    query_embeddings: EmbeddingStore | None = None
    judgments: JudgmentSet | None = None
    provider: TextProvider | None = None
    cache: HintCache | None = None
    scorer: ScorerBackend | None = None
    # Test hook: replaces first-stage retrieval for non-QE retrievers.
    retrieve_override: Callable[[SuperlativeQuery], RankedList] | None = None


def load_resources(cfg: PipelineConfig) -> Resources:
    if not cfg.products_path or not cfg.queries_path:
        raise UsageError("config must set [corpus] products and queries")
    store = load_products(cfg.products_path)
    queries = load_queries(cfg.queries_path)
    index = None
    if cfg.retriever in ("bm25", "qe_bm25"):
        index = load_index(cfg.index_path) if cfg.index_path and Path(cfg.index_path).exists() else build_index(store)
    embeddings = load_embeddings(cfg.embeddings_path) if cfg.embeddings_path else None
    query_embeddings = (
        load_embeddings(cfg.query_embeddings_path) if cfg.query_embeddings_path else None
    )
    judgments = load_judgments(cfg.judgments_path) if cfg.judgments_path else None
    provider = make_provider(cfg.provider) if cfg.needs_hints else None
    cache = HintCache(cfg.cache_path) if cfg.needs_hints else None
    scorer: ScorerBackend | None = None
    if cfg.reranker != "none":
        scorer = (
            HttpScorer(cfg.scorer_endpoint, cfg.scorer_timeout)
            if cfg.scorer == "http"
            else LexicalScorer()
        )
    return Resources(
        store=store,
        queries=queries,
        index=index,
        embeddings=embeddings,
        query_embeddings=query_embeddings,
        judgments=judgments,
        provider=provider,
        cache=cache,
        scorer=scorer,
    )


@dataclass(frozen=True)
class QueryFailure:
    query_id: str
    error: str


@dataclass(frozen=True)
class RunArtifact:
    config_snapshot: dict
    rankings: tuple[RankedList, ...]
    latencies: tuple[LatencySample, ...]
    failures: tuple[QueryFailure, ...] = ()


def _first_stage(
    cfg: PipelineConfig, res: Resources, q: SuperlativeQuery, hints: HintSet | None
) -> RankedList:
    if res.retrieve_override is not None and cfg.retriever != "qe_bm25":
        return res.retrieve_override(q)
    if cfg.retriever == "bm25":
        return retrieve_bm25(res.index, q, cfg.k)
    if cfg.retriever == "dense":
        if q.id not in res.query_embeddings:
            raise DataError(f"no query embedding for {q.id!r}")
        return retrieve_dense(res.embeddings, res.query_embeddings.vector(q.id), cfg.k, q.id)
    variants = build_variants(q, hints, cfg.qe)
    return retrieve_qe_bm25(res.index, variants, cfg.qe, query_id=q.id)


def _rerank_stage(
    cfg: PipelineConfig,
    res: Resources,
    q: SuperlativeQuery,
    candidates: RankedList,
    hints: HintSet | None,
) -> RankedList:
    if cfg.reranker == "none" or not candidates.entries:
        return candidates
    if cfg.reranker == "pointwise":
        backend = res.scorer
        if isinstance(backend, LexicalScorer):
            backend = backend.bind(hints if cfg.use_hints else None)
        return pointwise_rerank(
            q,
            candidates,
            res.store,
            backend,
            hints=hints if cfg.use_hints else None,
            mode=cfg.enrichment,
        )
    return listwise_rerank(q, candidates, res.store, res.scorer, strategy=cfg.chunk_strategy)


def _process_query(
    cfg: PipelineConfig, res: Resources, q: SuperlativeQuery
) -> tuple[RankedList, LatencySample]:
    t_start = time.perf_counter()
    hints: HintSet | None = None
    hint_seconds = 0.0
    stages: dict[str, float] = {}

    def compute_hints() -> None:
        nonlocal hints, hint_seconds
        t0 = time.perf_counter()
        hints = gen_hints(q, res.provider, res.cache, cfg.num_coverage_queries)
        hint_seconds = time.perf_counter() - t0

    if cfg.needs_hints and cfg.hints_before_retrieval:
        compute_hints()
        stages["hints"] = hint_seconds
        t0 = time.perf_counter()
        ranking = _first_stage(cfg, res, q, hints)
        stages["retrieve"] = time.perf_counter() - t0
    elif cfg.needs_hints:
        hint_error: list[BaseException] = []

        def hint_task():
            try:
                compute_hints()
            except BaseException as e:  # re-raised on the query worker below
                hint_error.append(e)

        thread = threading.Thread(target=hint_task, name=f"hints-{q.id}")
        thread.start()
        t0 = time.perf_counter()
        try:
            ranking = _first_stage(cfg, res, q, None)
        finally:
            retrieve_seconds = time.perf_counter() - t0
            thread.join()
        if hint_error:
            raise hint_error[0]
        stages["retrieve"] = retrieve_seconds
        # Only the join wait is attributed to hints; the rest overlapped.
        stages["hints"] = max(0.0, (time.perf_counter() - t_start) - retrieve_seconds)
    else:
        t0 = time.perf_counter()
        ranking = _first_stage(cfg, res, q, None)
        stages["retrieve"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    ranking = _rerank_stage(cfg, res, q, ranking, hints)
    stages["rerank"] = time.perf_counter() - t0

    total = time.perf_counter() - t_start
    sample = LatencySample(query_id=q.id, seconds=total, stages=stages)
    return ranking, sample


def run_pipeline(
    cfg: PipelineConfig,
    queries: Sequence[SuperlativeQuery] | None = None,
    resources: Resources | None = None,
) -> RunArtifact:
    """Run every query through retrieve/hint/rerank; failures are recorded, not fatal."""
    res = resources if resources is not None else load_resources(cfg)
    qs = list(queries) if queries is not None else res.queries

    results: dict[str, tuple[RankedList, LatencySample]] = {}
    failures: list[QueryFailure] = []
    with ThreadPoolExecutor(max_workers=cfg.worker_count) as pool:
        futures = [(q, pool.submit(_process_query, cfg, res, q)) for q in qs]
        for q, future in futures:
            try:
                results[q.id] = future.result()
            except HintrankError as e:
                failures.append(QueryFailure(q.id, f"{type(e).__name__}: {e}"))

    rankings = tuple(results[q.id][0] for q in qs if q.id in results)
    latencies = tuple(results[q.id][1] for q in qs if q.id in results)
    return RunArtifact(
        config_snapshot=cfg.snapshot(),
        rankings=rankings,
        latencies=latencies,
        failures=tuple(failures),
    )


def rerank_run(
    cfg: PipelineConfig,
    rankings: Sequence[RankedList],
    resources: Resources | None = None,
) -> RunArtifact:
    """Apply the configured reranker to already-retrieved rankings."""
    import dataclasses

    cfg = dataclasses.replace(cfg, retriever="bm25")  # override supplies candidates
    res = resources if resources is not None else load_resources(cfg)
    by_id = {r.query_id: r for r in rankings}
    res = dataclasses.replace(res, retrieve_override=lambda q: by_id[q.id])
    queries = [q for q in res.queries if q.id in by_id]
    return run_pipeline(cfg, queries, res)


def save_artifact(artifact: RunArtifact, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_run(artifact.rankings, out / "run.jsonl")
    with open(out / "latency.jsonl", "w", encoding="utf-8") as f:
        for sample in artifact.latencies:
            f.write(
                json.dumps(
                    {
                        "query_id": sample.query_id,
                        "seconds": sample.seconds,
                        "stages": dict(sample.stages),
                    }
                )
                + "\n"
            )
    with open(out / "config.json", "w", encoding="utf-8") as f:
        json.dump(artifact.config_snapshot, f, indent=2, sort_keys=True)
        f.write("\n")
    with open(out / "failures.jsonl", "w", encoding="utf-8") as f:
        for failure in artifact.failures:
            f.write(json.dumps({"query_id": failure.query_id, "error": failure.error}) + "\n")


def load_latency_samples(path: str | Path) -> list[LatencySample]:
    samples = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            samples.append(
                LatencySample(
                    query_id=record["query_id"],
                    seconds=record["seconds"],
                    stages=record.get("stages", {}),
                )
            )
    return samples
