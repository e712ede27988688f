"""Text-generation providers, prompt-driven operations, and the hint cache.

Two providers implement the same one-shot completion interface: a
deterministic mock for offline runs and tests, and a generic HTTP client
speaking a minimal chat-completion request (model, temperature 0, one user
message). The mock recognizes which template a prompt came from and emits
schema-valid output seeded by (seed, prompt content), so fixed seeds give
byte-identical replies.

Cache file format: one record per line,
``query_id <TAB> sha256(normalized query) <TAB> canonical HintSet``.
"""

from __future__ import annotations

import hashlib
import logging
import os
import random
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import requests

from .corpus import Product, RelevanceJudgment, RelevanceLabel, SuperlativeQuery
from .errors import (
    CountMismatch,
    DataError,
    MalformedRecord,
    ParseFailedTwice,
    ProviderError,
    UnknownLabel,
)
from .hints import HintSet, parse_hintset, parse_literal, serialize_hintset, serialize_literal
from .prompts import TEMPLATES, render
from .textindex import tokenize

logger = logging.getLogger(__name__)

ENV_ENDPOINT = "HINTGEN_ENDPOINT"
ENV_API_KEY = "HINTGEN_API_KEY"
ENV_TIMEOUT_MS = "HINTGEN_TIMEOUT_MS"

# One retry with the same prompt when the reply fails to parse.
PARSE_RETRIES = 1


class TextProvider(Protocol):
    def complete(self, prompt: str) -> str: ...


@dataclass(frozen=True)
class ProviderConfig:
    kind: str = "mock"
    endpoint: str | None = None
    api_key: str | None = None
    model: str = "default"
    timeout: float = 30.0
    max_retries: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("mock", "http"):
            raise ValueError(f"unknown provider kind: {self.kind!r}")
        if self.kind == "http" and not self.endpoint:
            raise ValueError("http provider requires an endpoint")
        if not 0 <= self.max_retries <= 5:
            raise ValueError(f"max_retries must be in [0, 5], got {self.max_retries}")


def provider_config_from_env(kind: str = "http", **overrides) -> ProviderConfig:
    """Build a ProviderConfig from HINTGEN_* environment variables."""
    timeout_ms = os.environ.get(ENV_TIMEOUT_MS)
    values = {
        "kind": kind,
        "endpoint": os.environ.get(ENV_ENDPOINT),
        "api_key": os.environ.get(ENV_API_KEY),
        "timeout": float(timeout_ms) / 1000.0 if timeout_ms else 30.0,
    }
    values.update(overrides)
    return ProviderConfig(**values)


def make_provider(config: ProviderConfig) -> TextProvider:
    if config.kind == "mock":
        return MockProvider(config.seed)
    return HttpProvider(config)


# --- HTTP provider -----------------------------------------------------------

class HttpProvider:
    """Minimal chat-completion-shaped client; safe for concurrent calls."""

    def __init__(self, config: ProviderConfig, session: requests.Session | None = None):
        self.config = config
        self._session = session or requests.Session()

    def complete(self, prompt: str) -> str:
        body = {
            "model": self.config.model,
            "temperature": 0,
            "messages": [{"role": "user", "content": prompt}],
        }
        headers = {}
        if self.config.api_key:
            headers["Authorization"] = f"Bearer {self.config.api_key}"
        last_error: Exception | None = None
        for attempt in range(self.config.max_retries + 1):
            try:
                response = self._session.post(
                    self.config.endpoint,
                    json=body,
                    headers=headers,
                    timeout=self.config.timeout,
                )
                if response.status_code >= 500:
                    raise ProviderError(f"gateway returned {response.status_code}")
                if response.status_code != 200:
                    raise ProviderError(
                        f"gateway returned {response.status_code}: {response.text[:200]}"
                    )
                return self._extract_text(response.json())
            except (requests.RequestException, ProviderError) as e:
                last_error = e
                if attempt < self.config.max_retries:
                    time.sleep(min(0.25 * 2**attempt, 2.0))
        raise ProviderError(f"provider unreachable after retries: {last_error}")

    @staticmethod
    def _extract_text(data) -> str:
        try:
            candidate = data["choices"][0]
            if "message" in candidate:
                return candidate["message"]["content"]
            return candidate["text"]
        except (KeyError, IndexError, TypeError):
            raise ProviderError(f"unrecognized completion payload: {str(data)[:200]}")


# --- deterministic mock provider ----------------------------------------------

_BRAND_LEXICON = (
    "Acmeline", "Zenith", "Nimbus", "Northpeak", "Verano", "Oakfield",
    "Lumetra", "Solstice", "Kestrel", "Bluecrest", "Marlowe", "Tundra",
    "Vantor", "Heliux", "Quartzen", "Ridgeway",
)

_FEATURE_LEXICON = (
    ("durable", ("sturdy", "rugged", "longlasting"), "physical"),
    ("comfortable", ("cozy", "plush", "ergonomic"), "convenience"),
    ("lightweight", ("light", "portable", "featherweight"), "physical"),
    ("waterproof", ("watertight", "weatherproof", "rainproof"), "performance"),
    ("quiet", ("silent", "noiseless", "hushed"), "performance"),
    ("fast", ("quick", "speedy", "rapid"), "performance"),
    ("stylish", ("sleek", "elegant", "fashionable"), "aesthetic"),
    ("affordable", ("economical", "budget", "inexpensive"), "value"),
    ("spacious", ("roomy", "expansive", "oversized"), "physical"),
    ("versatile", ("multipurpose", "adaptable", "allround"), "convenience"),
)

_SUPERLATIVE_MARKERS = frozenset(
    {"best", "top", "most", "popular", "leading", "greatest", "finest", "famous"}
)

_QUERY_GEN_RE = re.compile(r"Generate (\d+) distinct, natural search queries for (.*?) as found")
_NUM_QUERIES_RE = re.compile(r"Generate exactly (\d+) feature coverage queries")
_BATCH_SIZE_RE = re.compile(r"contain \*\*(\d+)\*\* query-product pairs")
_PAIR_LINE_RE = re.compile(r"^\d+\. query: (.*?) product: (.*)$")


class MockProvider:
    """Deterministic provider: identical (seed, prompt) gives identical text."""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.calls = 0

    def complete(self, prompt: str) -> str:
        self.calls += 1
        if "# Brand and Feature Extraction from Superlative Queries" in prompt:
            return self._hints(prompt)
        if "You are an e-commerce search expert." in prompt:
            return self._queries(prompt)
        if "## Understanding Superlative Product Queries" in prompt:
            return self._annotations(prompt)
        if "**2 most relevant products**" in prompt:
            return self._chunk(prompt)
        raise ProviderError("mock provider does not recognize this prompt")

    def _rng(self, *key_parts: object) -> random.Random:
        return random.Random("|".join(str(p) for p in (self.seed, *key_parts)))

    @staticmethod
    def _between(text: str, start: str, end: str) -> str:
        lo = text.index(start) + len(start)
        hi = text.index(end, lo)
        return text[lo:hi].strip()

    def _hints(self, prompt: str) -> str:
        query = self._between(prompt, "## Query\n", "\n\nYour output:")
        match = _NUM_QUERIES_RE.search(prompt)
        num_queries = int(match.group(1)) if match else 10
        rng = self._rng("hints", query, num_queries)

        tokens = tokenize(query)
        core = [t for t in tokens if t not in _SUPERLATIVE_MARKERS] or tokens
        core_text = " ".join(core)

        n_brands = rng.randint(5, 8)
        brand_names = rng.sample(_BRAND_LEXICON, n_brands)
        confidences = sorted(rng.sample(range(55, 100), n_brands), reverse=True)
        brands = [
            {"name": name, "confidence": conf}
            for name, conf in zip(brand_names, confidences)
        ]

        n_features = rng.randint(5, 7)
        picks = rng.sample(_FEATURE_LEXICON, n_features)
        importances = sorted(rng.sample(range(1, 11), n_features), reverse=True)
        features = [
            {
                "name": name,
                "synonyms": list(synonyms),
                "category": category,
                "importance": importance,
                "brands_known_for": rng.sample(brand_names, 2),
            }
            for (name, synonyms, category), importance in zip(picks, importances)
        ]

        coverage = []
        for _ in range(num_queries):
            terms = [rng.choice((f["name"], *f["synonyms"])) for f in features]
            coverage.append(f"{core_text} {' '.join(terms)}")

        return (
            f"Interpreting the superlative intent behind: {query}\n\n"
            f"<analysis>\n"
            + serialize_literal(
                {
                    "domain": core_text,
                    "ranking_intent": (
                        "The superlative asks for items that excel on the key "
                        "category attributes rather than merely matching the noun."
                    ),
                    "query_clarification": "No blocking ambiguity detected.",
                }
            )
            + "\n</analysis>\n\n<brands>\n"
            + serialize_literal(brands)
            + "\n</brands>\n\n<features>\n"
            + serialize_literal(features)
            + "\n</features>\n\n<feature_coverage_queries>\n"
            + serialize_literal(coverage)
            + "\n</feature_coverage_queries>\n"
        )

    def _queries(self, prompt: str) -> str:
        match = _QUERY_GEN_RE.search(prompt)
        if not match:
            raise ProviderError("mock could not locate query-generation bindings")
        n, noun = int(match.group(1)), match.group(2)
        rng = self._rng("queries", n, noun)
        markers = ("best", "top", "most popular", "leading")
        uses = ("everyday use", "home", "travel", "kids", "professionals", "gifts")
        queries: list[str] = []
        seen: set[str] = set()
        while len(queries) < n:
            marker = rng.choice(markers)
            text = f"{marker} {noun}"
            if rng.random() < 0.5:
                text += f" for {rng.choice(uses)}"
            if text in seen:
                text += f" {len(queries) + 1}"
            seen.add(text)
            queries.append(text)
        return serialize_literal(queries)

    def _annotations(self, prompt: str) -> str:
        match = _BATCH_SIZE_RE.search(prompt)
        batch_size = int(match.group(1)) if match else 0
        body = self._between(prompt, "## Input\n", "\n\n## Output")
        pairs = []
        for line in body.splitlines():
            m = _PAIR_LINE_RE.match(line.strip())
            if m:
                pairs.append((m.group(1), m.group(2)))
        if len(pairs) != batch_size:
            raise ProviderError(
                f"mock parsed {len(pairs)} pairs but prompt declares {batch_size}"
            )
        out = []
        for query, product in pairs:
            rng = self._rng("label", query, product)
            roll = rng.random()
            if roll < 0.20:
                label = RelevanceLabel.RELEVANT_AND_BEST.value
            elif roll < 0.72:
                label = RelevanceLabel.RELEVANT_NOT_BEST.value
            else:
                label = RelevanceLabel.IRRELEVANT.value
            out.append(
                {
                    "reasoning": f"Compared the product against {query!r} requirements.",
                    "label": label,
                    "confidence": rng.randint(55, 97),
                }
            )
        return serialize_literal(out)

    def _chunk(self, prompt: str) -> str:
        query = self._between(prompt, "Query: ", "\n")
        body = self._between(prompt, "Products:\n", "\n\nOUTPUT FORMAT:")
        ids = []
        for line in body.splitlines():
            line = line.strip()
            if line and "." in line:
                ids.append(line.split(".", 1)[0].strip())
        if not ids:
            raise ProviderError("mock found no products in chunk prompt")
        scored = sorted(
            ids,
            key=lambda doc_id: self._rng("chunkscore", query, doc_id).random(),
            reverse=True,
        )
        finalists = scored[: min(2, len(ids))]
        rng = self._rng("chunk", query, ",".join(ids))
        # Scores avoid 0/5 endings, mirroring the prompt's advice.
        pool = [v for v in range(40, 100) if v % 5 != 0]
        values = sorted(rng.sample(pool, len(finalists)), reverse=True)
        pairs = ", ".join(f'"{doc_id}": {val}' for doc_id, val in zip(finalists, values))
        return "{" + pairs + "}"


# --- hint cache ----------------------------------------------------------------

def normalize_query(text: str) -> str:
    return " ".join(tokenize(text))


def query_hash(normalized: str) -> str:
    return hashlib.sha256(normalized.encode("utf-8")).hexdigest()


class HintCache:
    """File-backed hint cache; appends are serialized, reads are lock-free."""

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self._entries: dict[str, HintSet] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            self._load()

    def _load(self) -> None:
        with open(self.path, "r", encoding="utf-8") as f:
            for line_no, line in enumerate(f, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                parts = line.split("\t")
                if len(parts) != 3:
                    raise MalformedRecord(line_no, "expected 3 tab-separated fields")
                _, digest, serialized = parts
                hints = parse_hintset(
                    serialized, expected_queries=_coverage_count(serialized)
                )
                self._entries[digest] = hints

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, normalized: str) -> HintSet | None:
        return self._entries.get(query_hash(normalized))

    def put(self, query_id: str, normalized: str, hints: HintSet) -> None:
        digest = query_hash(normalized)
        with self._lock:
            if digest in self._entries:
                return
            self._entries[digest] = hints
            if self.path is not None:
                with open(self.path, "a", encoding="utf-8") as f:
                    f.write(f"{query_id}\t{digest}\t{serialize_hintset(hints)}\n")


def _coverage_count(serialized: str) -> int:
    """Coverage-query count of a canonical record (needed to re-parse it)."""
    body = serialized.split("<feature_coverage_queries>", 1)[1]
    body = body.split("</feature_coverage_queries>", 1)[0]
    value = parse_literal(body)
    return len(value) if isinstance(value, list) else 0


# --- prompt-driven operations ----------------------------------------------------

def _complete_and_parse(provider: TextProvider, prompt: str, parse):
    """Call the provider, retrying once with the same prompt on parse failure."""
    raw = ""
    for attempt in range(PARSE_RETRIES + 1):
        raw = provider.complete(prompt)
        try:
            return parse(raw)
        except DataError as e:
            logger.warning("provider output failed to parse (attempt %d): %s", attempt + 1, e)
    raise ParseFailedTwice(raw[:200])


def gen_hints(
    q: SuperlativeQuery,
    provider: TextProvider,
    cache: HintCache | None = None,
    expected_queries: int = 10,
) -> HintSet:
    """Generate (or fetch cached) hints for one superlative query."""
    normalized = normalize_query(q.text)
    if cache is not None:
        hit = cache.get(normalized)
        if hit is not None:
            return hit
    prompt = render(
        TEMPLATES["hint_generation"], {"num_queries": expected_queries, "query": q.text}
    )
    hints = _complete_and_parse(
        provider, prompt, lambda raw: parse_hintset(raw, expected_queries)
    )
    if cache is not None:
        cache.put(q.id, normalized, hints)
    return hints


def gen_queries(
    category: tuple[str, str], n: int, provider: TextProvider
) -> list[str]:
    """Generate superlative query candidates for one (parent, sub) category.

    The BM25 zero-hit filter is the caller's job. Counts that differ from
    ``n`` are accepted with a warning.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    parent, sub = category
    noun = sub or parent
    prompt = render(TEMPLATES["query_generation"], {"n": n, "noun": noun})

    def parse(raw: str) -> list[str]:
        value = parse_literal(raw)
        if not isinstance(value, list) or not all(isinstance(v, str) and v for v in value):
            raise DataError("expected a list of nonempty strings")
        return value

    queries = _complete_and_parse(provider, prompt, parse)
    if len(queries) != n:
        logger.warning("requested %d queries for %r, provider returned %d", n, noun, len(queries))
    return queries


def annotate_pairs(
    batch: Sequence[tuple[SuperlativeQuery, Product]], provider: TextProvider
) -> list[RelevanceJudgment]:
    """Judge a batch of query-product pairs, preserving order."""
    if not batch:
        raise ValueError("batch must be nonempty")
    lines = [
        f"{i}. query: {q.text} product: {p.title} {p.description}"
        for i, (q, p) in enumerate(batch, start=1)
    ]
    prompt = render(
        TEMPLATES["relevance_annotation"],
        {"batch_size": len(batch), "input": "\n".join(lines)},
    )
    value = parse_literal(provider.complete(prompt))
    if not isinstance(value, list):
        raise DataError("annotation reply must be a list of maps")
    if len(value) != len(batch):
        raise CountMismatch(len(batch), len(value))

    judgments: list[RelevanceJudgment] = []
    for (q, p), entry in zip(batch, value):
        if not isinstance(entry, dict):
            raise DataError("annotation entries must be maps")
        label_raw = entry.get("label")
        if not isinstance(label_raw, str):
            raise UnknownLabel(str(label_raw))
        confidence = entry.get("confidence")
        if not isinstance(confidence, int):
            raise DataError(f"confidence must be an integer, got {confidence!r}")
        reasoning = entry.get("reasoning")
        judgments.append(
            RelevanceJudgment(
                query_id=q.id,
                product_id=p.id,
                label=RelevanceLabel.from_string(label_raw),
                confidence=confidence,
                reasoning=reasoning if isinstance(reasoning, str) else None,
            )
        )
    return judgments
