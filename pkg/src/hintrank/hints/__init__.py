"""Structured hint model: block extraction, literal parsing, validation,
canonical serialization, and query-enrichment formatting."""

from .literal import DuplicateKey, LiteralSyntaxError, parse_literal, serialize_literal
from .schema import (
    Analysis,
    BrandHint,
    EnrichMode,
    FeatureHint,
    HintSet,
    extract_blocks,
    enrich_query,
    format_pointwise_input,
    parse_hintset,
    pointwise_query_repr,
    serialize_hintset,
    top_brands,
)

__all__ = [
    "Analysis",
    "BrandHint",
    "DuplicateKey",
    "EnrichMode",
    "FeatureHint",
    "HintSet",
    "LiteralSyntaxError",
    "enrich_query",
    "extract_blocks",
    "format_pointwise_input",
    "parse_hintset",
    "parse_literal",
    "pointwise_query_repr",
    "serialize_hintset",
    "serialize_literal",
    "top_brands",
]
