"""Second-stage ranking over first-stage candidates.

Pointwise mode scores each query-product pair independently and sorts.
Listwise mode partitions up to 50 candidates into chunks of 10, extracts
each chunk's top 2 with integer scores, merges the finalists to the head of
the output, and appends the non-finalists in retrieval order (non-finalist
entries carry synthetic strictly-decreasing scores so the output stays a
valid RankedList; metrics at k <= 10 never see them).

Scorer wire protocol (served by a scorer service, consumed here):
- POST /v1/score       {"query": str, "products": [{"id","text"}...]}
                       -> {"scores": [float in [0,1]...]} same length/order
- POST /v1/rank_chunk  {"query": str, "products": [<=10 of {"id","text"}]}
                       -> {"top": [min(2,n) of {"id", "score": int 0-100}]}
                          in descending score order
- GET  /v1/health      -> {"status": "ok"}
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Protocol, Sequence

import requests

from .corpus import Product, ProductStore, SuperlativeQuery
from .errors import (
    BackendError,
    DataError,
    LengthMismatch,
    ParseFailed,
    ProtocolViolation,
)
from .hints import (
    EnrichMode,
    HintSet,
    enrich_query,
    parse_literal,
    pointwise_query_repr,
    top_brands,
)
from .prompts import TEMPLATES, render
from .retrieval import RankedList
from .textindex import ScoredDoc, tokenize

CHUNK_SIZE = 10
FINALISTS_PER_CHUNK = 2


class ScorerBackend(Protocol):
    """Contract every scorer implements (lexical, HTTP, provider-driven)."""

    def score_pairs(self, query_repr: str, products: Sequence[tuple[str, str]]) -> list[float]: ...

    def rank_chunk(self, query: str, products: Sequence[tuple[str, str]]) -> list[tuple[str, int]]: ...


class ChunkStrategy(enum.Enum):
    CONTIGUOUS = "contiguous"
    STRIDED = "strided"


# --- built-in lexical scorer ----------------------------------------------------

@dataclass(frozen=True)
class LexicalScorerConfig:
    feature_weight_scale: float = 0.1
    brand_bonus: float = 1.0

    def __post_init__(self):
        for name in ("feature_weight_scale", "brand_bonus"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and nonnegative, got {value}")


def _phrase_in(tokens: frozenset[str], phrase: str) -> bool:
    phrase_tokens = tokenize(phrase)
    return bool(phrase_tokens) and all(t in tokens for t in phrase_tokens)


def lexical_score(
    query_repr: str,
    h: HintSet | None,
    product_text: str,
    cfg: LexicalScorerConfig = LexicalScorerConfig(),
) -> float:
    """Token-overlap score plus hint-driven feature and brand bonuses.

    overlap = |query tokens ∩ product tokens| / |query tokens|; each feature
    whose name or any synonym appears in the product adds importance *
    feature_weight_scale; any top-3 brand match adds brand_bonus once.
    """
    query_tokens = set(tokenize(query_repr))
    product_tokens = frozenset(tokenize(product_text))
    score = 0.0
    if query_tokens:
        score += len(query_tokens & product_tokens) / len(query_tokens)
    if h is not None:
        for feature in h.features:
            names = (feature.name, *feature.synonyms)
            if any(_phrase_in(product_tokens, name) for name in names):
                score += feature.importance * cfg.feature_weight_scale
        if any(_phrase_in(product_tokens, b.name) for b in top_brands(h)):
            score += cfg.brand_bonus
    return score


class LexicalScorer:
    """Deterministic offline backend; optionally hint-aware."""

    def __init__(self, cfg: LexicalScorerConfig = LexicalScorerConfig(), hints: HintSet | None = None):
        self.cfg = cfg
        self.hints = hints

    def bind(self, hints: HintSet | None) -> "LexicalScorer":
        """A copy of this scorer using the given query's hints."""
        return LexicalScorer(self.cfg, hints)

    def score_pairs(self, query_repr: str, products: Sequence[tuple[str, str]]) -> list[float]:
        return [lexical_score(query_repr, self.hints, text, self.cfg) for _, text in products]

    def rank_chunk(self, query: str, products: Sequence[tuple[str, str]]) -> list[tuple[str, int]]:
        scored = sorted(
            ((doc_id, lexical_score(query, self.hints, text, self.cfg)) for doc_id, text in products),
            key=lambda item: (-item[1], item[0]),
        )
        # Squash the unbounded raw score into the protocol's 0-100 integers.
        return [
            (doc_id, round(100.0 * raw / (1.0 + raw)))
            for doc_id, raw in scored[: min(FINALISTS_PER_CHUNK, len(products))]
        ]


# --- HTTP scorer client -----------------------------------------------------------

class HttpScorer:
    """Client for the scorer wire protocol."""

    def __init__(self, endpoint: str, timeout: float = 30.0, session: requests.Session | None = None):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self._session = session or requests.Session()

    def _post(self, path: str, body: dict) -> dict:
        try:
            response = self._session.post(
                f"{self.endpoint}{path}", json=body, timeout=self.timeout
            )
        except requests.RequestException as e:
            raise BackendError(f"scorer unreachable: {e}") from e
        if response.status_code != 200:
            raise BackendError(f"scorer returned {response.status_code}: {response.text[:200]}")
        try:
            return response.json()
        except ValueError as e:
            raise BackendError(f"scorer returned non-JSON body: {e}") from e

    def score_pairs(self, query_repr: str, products: Sequence[tuple[str, str]]) -> list[float]:
        body = {
            "query": query_repr,
            "products": [{"id": doc_id, "text": text} for doc_id, text in products],
        }
        data = self._post("/v1/score", body)
        scores = data.get("scores")
        if not isinstance(scores, list) or len(scores) != len(products):
            raise LengthMismatch(len(products), len(scores) if isinstance(scores, list) else -1)
        for value in scores:
            if not isinstance(value, (int, float)) or not 0.0 <= float(value) <= 1.0:
                raise ProtocolViolation(f"score {value!r} outside [0, 1]")
        return [float(v) for v in scores]

    def rank_chunk(self, query: str, products: Sequence[tuple[str, str]]) -> list[tuple[str, int]]:
        body = {
            "query": query,
            "products": [{"id": doc_id, "text": text} for doc_id, text in products],
        }
        data = self._post("/v1/rank_chunk", body)
        top = data.get("top")
        if not isinstance(top, list):
            raise ProtocolViolation("reply missing 'top' list")
        reply = []
        for entry in top:
            if not isinstance(entry, dict) or "id" not in entry or "score" not in entry:
                raise ProtocolViolation(f"bad rank_chunk entry: {entry!r}")
            reply.append((entry["id"], entry["score"]))
        return validate_chunk_reply([doc_id for doc_id, _ in products], reply)

    def health(self) -> bool:
        try:
            response = self._session.get(f"{self.endpoint}/v1/health", timeout=self.timeout)
            return response.status_code == 200 and response.json().get("status") == "ok"
        except (requests.RequestException, ValueError):
            return False


# --- generative chunk backend -------------------------------------------------------

def chunk_prompt_roundtrip(
    query_text: str, chunk: Sequence[tuple[str, str]]
) -> tuple[str, Callable[[str], list[tuple[str, int]]]]:
    """Render the chunk-ranking prompt and return a validating reply parser."""
    if len(chunk) > CHUNK_SIZE:
        raise ValueError(f"chunk size {len(chunk)} exceeds {CHUNK_SIZE}")
    products = "\n".join(f"{doc_id}. {text}" for doc_id, text in chunk)
    prompt = render(TEMPLATES["chunk_ranking"], {"query": query_text, "products": products})
    chunk_ids = [doc_id for doc_id, _ in chunk]

    def parse(reply: str) -> list[tuple[str, int]]:
        try:
            value = parse_literal(reply)
        except DataError as e:
            raise ParseFailed(f"chunk reply is not a literal map: {e}") from e
        if not isinstance(value, dict):
            raise ParseFailed(f"chunk reply must be a map, got {type(value).__name__}")
        return validate_chunk_reply(chunk_ids, list(value.items()))

    return prompt, parse


def validate_chunk_reply(
    chunk_ids: Sequence[str], reply: Sequence[tuple[str, object]]
) -> list[tuple[str, int]]:
    """Enforce the rank_chunk contract; returns (doc_id, score) sorted descending."""
    expected = min(FINALISTS_PER_CHUNK, len(chunk_ids))
    if len(reply) != expected:
        raise ProtocolViolation(f"expected {expected} finalists, got {len(reply)}")
    id_set = set(chunk_ids)
    seen: set[str] = set()
    validated: list[tuple[str, int]] = []
    for doc_id, score in reply:
        if doc_id not in id_set:
            raise ProtocolViolation(f"finalist {doc_id!r} is not in the chunk")
        if doc_id in seen:
            raise ProtocolViolation(f"finalist {doc_id!r} repeated")
        seen.add(doc_id)
        if not isinstance(score, int) or isinstance(score, bool) or not 0 <= score <= 100:
            raise ProtocolViolation(f"finalist score {score!r} outside integer [0, 100]")
        validated.append((doc_id, score))
    validated.sort(key=lambda item: (-item[1], item[0]))
    return validated


class ProviderChunkBackend:
    """rank_chunk via a text-generation provider and the chunk prompt."""

    def __init__(self, provider):
        self.provider = provider

    def score_pairs(self, query_repr: str, products: Sequence[tuple[str, str]]) -> list[float]:
        raise BackendError("generative backend only supports rank_chunk")

    def rank_chunk(self, query: str, products: Sequence[tuple[str, str]]) -> list[tuple[str, int]]:
        prompt, parse = chunk_prompt_roundtrip(query, products)
        return parse(self.provider.complete(prompt))


# --- reranking operations --------------------------------------------------------------

def _product_text(p: Product) -> str:
    return f"{p.title} {p.description}"


def pointwise_rerank(
    q: SuperlativeQuery,
    candidates: RankedList,
    store: ProductStore,
    backend: ScorerBackend,
    hints: HintSet | None = None,
    mode: EnrichMode = EnrichMode.COVERAGE_QUERY,
    include_synonyms: bool = False,
) -> RankedList:
    """Score each candidate pair independently and sort by descending score.

    With hints, the query side becomes the enriched query plus the top-3
    brand segment; without, it is "relevance query: " + the original text.
    """
    if not candidates.entries:
        raise ValueError("candidates must be nonempty")
    if hints is not None:
        enriched = enrich_query(q, hints, mode, include_synonyms=include_synonyms)
        query_repr = pointwise_query_repr(enriched, hints)
    else:
        query_repr = f"relevance query: {q.text}"
    products = [(e.doc_id, _product_text(store.get(e.doc_id))) for e in candidates.entries]
    scores = backend.score_pairs(query_repr, products)
    if len(scores) != len(products):
        raise LengthMismatch(len(products), len(scores))
    ranked = sorted(zip(products, scores), key=lambda item: (-item[1], item[0][0]))
    return RankedList(
        query_id=q.id,
        entries=tuple(ScoredDoc(doc_id, float(score)) for (doc_id, _), score in ranked),
    )


def _chunks(entries: Sequence[ScoredDoc], strategy: ChunkStrategy) -> list[list[ScoredDoc]]:
    n_chunks = math.ceil(len(entries) / CHUNK_SIZE)
    if strategy is ChunkStrategy.CONTIGUOUS:
        return [list(entries[i * CHUNK_SIZE : (i + 1) * CHUNK_SIZE]) for i in range(n_chunks)]
    return [list(entries[j::n_chunks]) for j in range(n_chunks)]


def listwise_rerank(
    q: SuperlativeQuery,
    candidates: RankedList,
    store: ProductStore,
    backend: ScorerBackend,
    strategy: ChunkStrategy = ChunkStrategy.CONTIGUOUS,
) -> RankedList:
    """Chunk the candidates, take each chunk's top 2, merge finalists first."""
    n = len(candidates.entries)
    if not 1 <= n <= 50:
        raise ValueError(f"listwise rerank expects 1-50 candidates, got {n}")

    finalists: list[tuple[str, int]] = []
    finalist_ids: set[str] = set()
    for chunk in _chunks(candidates.entries, strategy):
        products = [(e.doc_id, _product_text(store.get(e.doc_id))) for e in chunk]
        reply = backend.rank_chunk(q.text, products)
        reply = validate_chunk_reply([doc_id for doc_id, _ in products], reply)
        finalists.extend(reply)
        finalist_ids.update(doc_id for doc_id, _ in reply)

    finalists.sort(key=lambda item: (-item[1], item[0]))
    entries = [ScoredDoc(doc_id, float(score)) for doc_id, score in finalists]
    tail_score = (entries[-1].score if entries else 0.0) - 1.0
    for e in candidates.entries:
        if e.doc_id not in finalist_ids:
            entries.append(ScoredDoc(e.doc_id, tail_score))
            tail_score -= 1.0
    return RankedList(query_id=q.id, entries=tuple(entries))
