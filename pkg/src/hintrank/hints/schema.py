"""HintSet model: the structured interpretation of a superlative query.

A hint-generation reply carries four tagged blocks -- <analysis>, <brands>,
<features>, <feature_coverage_queries> -- each holding one value in the
restricted literal grammar. Parsing composes block extraction, literal
parsing, and schema mapping; serialization renders a canonical single line
that parsing inverts exactly. Count shortfalls against the requested 5-10
brands/features are warnings, not errors; lists longer than 10 are truncated
to the first 10 with a warning.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from ..errors import DataError, EmptyHints, MissingBlock, SchemaError, UnclosedBlock
from .literal import parse_literal, serialize_literal

if TYPE_CHECKING:
    from ..corpus import Product, SuperlativeQuery

BLOCK_TAGS = ("analysis", "brands", "features", "feature_coverage_queries")

_MIN_REQUESTED = 5
_MAX_ENTRIES = 10
DEFAULT_COVERAGE_QUERIES = 10


@dataclass(frozen=True, slots=True)
class Analysis:
    domain: str
    ranking_intent: str
    query_clarification: str


@dataclass(frozen=True, slots=True)
class BrandHint:
    name: str
    confidence: int

    def __post_init__(self):
        if not self.name:
            raise SchemaError("name", "brand name must be nonempty")
        if not 0 <= self.confidence <= 100:
            raise SchemaError("confidence", f"{self.confidence} outside [0, 100]")


@dataclass(frozen=True, slots=True)
class FeatureHint:
    name: str
    synonyms: tuple[str, ...]
    category: str
    importance: int
    brands_known_for: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.name:
            raise SchemaError("name", "feature name must be nonempty")
        if not 1 <= self.importance <= 10:
            raise SchemaError("importance", f"{self.importance} outside [1, 10]")


@dataclass(frozen=True)
class HintSet:
    analysis: Analysis
    brands: tuple[BrandHint, ...]
    features: tuple[FeatureHint, ...]
    coverage_queries: tuple[str, ...]
    warnings: tuple[str, ...] = field(default=(), compare=False, repr=False)


class EnrichMode(enum.Enum):
    COVERAGE_QUERY = "coverage_query"
    FEATURE_AUGMENT = "feature_augment"


# --- block extraction --------------------------------------------------------

def extract_blocks(raw: str) -> dict[str, str]:
    """Return the body of each tagged block (first occurrence, verbatim).

    Tags are matched case-sensitively; the body runs to the first matching
    closer, so stray openers inside a body are the parse stage's problem.
    """
    blocks: dict[str, str] = {}
    for tag in BLOCK_TAGS:
        opener, closer = f"<{tag}>", f"</{tag}>"
        start = raw.find(opener)
        if start < 0:
            raise MissingBlock(tag)
        body_start = start + len(opener)
        end = raw.find(closer, body_start)
        if end < 0:
            raise UnclosedBlock(tag)
        blocks[tag] = raw[body_start:end]
    return blocks


# --- schema mapping ----------------------------------------------------------

def _as_str(value, fieldname: str) -> str:
    if not isinstance(value, str):
        raise SchemaError(fieldname, f"expected a string, got {type(value).__name__}")
    return value


def _as_int(value, fieldname: str) -> int:
    if not isinstance(value, int) or isinstance(value, bool):
        raise SchemaError(fieldname, f"expected an integer, got {type(value).__name__}")
    return value


def _as_str_list(value, fieldname: str) -> tuple[str, ...]:
    if not isinstance(value, list):
        raise SchemaError(fieldname, f"expected a list, got {type(value).__name__}")
    return tuple(_as_str(v, fieldname) for v in value)


def _check_keys(entry: dict, required: tuple[str, ...], block: str) -> None:
    if not isinstance(entry, dict):
        raise SchemaError(block, f"expected a map entry, got {type(entry).__name__}")
    missing = [k for k in required if k not in entry]
    if missing:
        raise SchemaError(block, f"entry missing key(s): {', '.join(missing)}")
    extra = [k for k in entry if k not in required]
    if extra:
        raise SchemaError(block, f"entry has unexpected key(s): {', '.join(extra)}")


def _parse_analysis(body: str) -> Analysis:
    value = parse_literal(body)
    _check_keys(value, ("domain", "ranking_intent", "query_clarification"), "analysis")
    return Analysis(
        domain=_as_str(value["domain"], "domain"),
        ranking_intent=_as_str(value["ranking_intent"], "ranking_intent"),
        query_clarification=_as_str(value["query_clarification"], "query_clarification"),
    )


def _capped(entries: list, block: str, warnings: list[str]) -> list:
    if not entries:
        raise SchemaError(block, "at least one entry required")
    if len(entries) > _MAX_ENTRIES:
        warnings.append(f"{block}: {len(entries)} entries, keeping the first {_MAX_ENTRIES}")
        entries = entries[:_MAX_ENTRIES]
    elif len(entries) < _MIN_REQUESTED:
        warnings.append(f"{block}: only {len(entries)} entries (5-10 requested)")
    return entries


def _parse_brands(body: str, warnings: list[str]) -> tuple[BrandHint, ...]:
    value = parse_literal(body)
    if not isinstance(value, list):
        raise SchemaError("brands", f"expected a list, got {type(value).__name__}")
    brands = []
    for entry in _capped(value, "brands", warnings):
        _check_keys(entry, ("name", "confidence"), "brands")
        brands.append(
            BrandHint(
                name=_as_str(entry["name"], "name"),
                confidence=_as_int(entry["confidence"], "confidence"),
            )
        )
    return tuple(brands)


def _parse_features(body: str, warnings: list[str]) -> tuple[FeatureHint, ...]:
    value = parse_literal(body)
    if not isinstance(value, list):
        raise SchemaError("features", f"expected a list, got {type(value).__name__}")
    features = []
    for entry in _capped(value, "features", warnings):
        _check_keys(
            entry, ("name", "synonyms", "category", "importance", "brands_known_for"), "features"
        )
        feature = FeatureHint(
            name=_as_str(entry["name"], "name"),
            synonyms=_as_str_list(entry["synonyms"], "synonyms"),
            category=_as_str(entry["category"], "category"),
            importance=_as_int(entry["importance"], "importance"),
            brands_known_for=_as_str_list(entry["brands_known_for"], "brands_known_for"),
        )
        if not feature.synonyms:
            warnings.append(f"features: {feature.name!r} has no synonyms")
        features.append(feature)
    return tuple(features)


def _parse_coverage(body: str, expected_queries: int) -> tuple[str, ...]:
    value = parse_literal(body)
    queries = _as_str_list(value, "coverage_queries")
    if len(queries) != expected_queries:
        raise SchemaError(
            "coverage_queries", f"expected {expected_queries} queries, got {len(queries)}"
        )
    if any(not q for q in queries):
        raise SchemaError("coverage_queries", "queries must be nonempty")
    return queries


def parse_hintset(raw: str, expected_queries: int = DEFAULT_COVERAGE_QUERIES) -> HintSet:
    """Parse a hint-generation reply into a validated HintSet.

    Never aborts on malformed input: any byte sequence either parses or
    raises a structured DataError subclass.
    """
    if not isinstance(raw, str):
        raise DataError(f"expected text, got {type(raw).__name__}")
    blocks = extract_blocks(raw)
    warnings: list[str] = []
    return HintSet(
        analysis=_parse_analysis(blocks["analysis"]),
        brands=_parse_brands(blocks["brands"], warnings),
        features=_parse_features(blocks["features"], warnings),
        coverage_queries=_parse_coverage(blocks["feature_coverage_queries"], expected_queries),
        warnings=tuple(warnings),
    )


# --- canonical serialization ---------------------------------------------------

def serialize_hintset(h: HintSet) -> str:
    """Deterministic single-line rendering; parse_hintset inverts it exactly."""
    analysis = {
        "domain": h.analysis.domain,
        "ranking_intent": h.analysis.ranking_intent,
        "query_clarification": h.analysis.query_clarification,
    }
    brands = [{"name": b.name, "confidence": b.confidence} for b in h.brands]
    features = [
        {
            "name": f.name,
            "synonyms": list(f.synonyms),
            "category": f.category,
            "importance": f.importance,
            "brands_known_for": list(f.brands_known_for),
        }
        for f in h.features
    ]
    return (
        f"<analysis>{serialize_literal(analysis)}</analysis>"
        f"<brands>{serialize_literal(brands)}</brands>"
        f"<features>{serialize_literal(features)}</features>"
        f"<feature_coverage_queries>{serialize_literal(list(h.coverage_queries))}"
        f"</feature_coverage_queries>"
    )


# --- enrichment formatting -----------------------------------------------------

def top_brands(h: HintSet, n: int = 3) -> list[BrandHint]:
    """Highest-confidence brands, ties resolved by list order (stable sort)."""
    return sorted(h.brands, key=lambda b: -b.confidence)[:n]


def enrich_query(
    q: "SuperlativeQuery",
    h: HintSet,
    mode: EnrichMode,
    include_synonyms: bool = False,
) -> str:
    """Reformulate the query text using the hints.

    COVERAGE_QUERY takes the first generated coverage query; FEATURE_AUGMENT
    appends feature names (optionally their synonyms) by descending importance,
    ties by list order.
    """
    if mode is EnrichMode.COVERAGE_QUERY:
        if not h.coverage_queries:
            raise EmptyHints("no coverage queries to enrich with")
        return h.coverage_queries[0]
    if mode is EnrichMode.FEATURE_AUGMENT:
        if not h.features:
            raise EmptyHints("no features to enrich with")
        ordered = sorted(h.features, key=lambda f: -f.importance)
        terms: list[str] = []
        for feature in ordered:
            terms.append(feature.name)
            if include_synonyms:
                terms.extend(feature.synonyms)
        return f"{q.text} {' '.join(terms)}"
    raise ValueError(f"unknown enrichment mode: {mode!r}")


def pointwise_query_repr(enriched: str, h: HintSet | None) -> str:
    """Query side of the pointwise scorer input; empty brand list omits the segment."""
    repr_ = f"relevance query: {enriched}"
    if h is not None and h.brands:
        names = ", ".join(b.name for b in top_brands(h))
        repr_ += f" brands: {names}"
    return repr_


def format_pointwise_input(enriched: str, h: HintSet, p: "Product") -> str:
    """Full pointwise input: "relevance query: ... brands: ... product: ..."."""
    return f"{pointwise_query_repr(enriched, h)} product: {p.title} {p.description}"
