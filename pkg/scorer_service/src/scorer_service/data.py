"""Training-data assembly from the ranking engine's file formats.

Consumes only external interfaces: products/queries/judgments JSONL, and
the hint cache (query_id <TAB> hash <TAB> tagged blocks holding Python-
literal bodies, parsed here with ast.literal_eval — never executed).

Pair text layouts:
  bare:   "relevance query: <query text> product: <title> <description>"
  hinted: "relevance query: <first coverage query> brands: <top-3> product: ..."
"""

from __future__ import annotations

import ast
import json
import random
from dataclasses import dataclass
from pathlib import Path

POSITIVE_LABEL = "relevant and best"
KNOWN_LABELS = {POSITIVE_LABEL, "relevant but not best", "irrelevant"}


@dataclass(frozen=True)
class LabeledPair:
    query_id: str
    product_id: str
    text: str
    target: float


def _read_jsonl(path: str | Path):
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                yield json.loads(line)


def load_products(path: str | Path) -> dict[str, dict]:
    return {record["id"]: record for record in _read_jsonl(path)}


def load_queries(path: str | Path) -> dict[str, dict]:
    return {record["id"]: record for record in _read_jsonl(path)}


def load_judgments(path: str | Path) -> list[dict]:
    records = []
    for record in _read_jsonl(path):
        if record["label"] not in KNOWN_LABELS:
            raise ValueError(f"unknown label {record['label']!r}")
        records.append(record)
    return records


@dataclass(frozen=True)
class HintRecord:
    top_brands: tuple[str, ...]
    first_coverage_query: str | None


def _block(serialized: str, tag: str) -> str:
    opener, closer = f"<{tag}>", f"</{tag}>"
    start = serialized.index(opener) + len(opener)
    return serialized[start : serialized.index(closer, start)]


def parse_hint_record(serialized: str) -> HintRecord:
    brands = ast.literal_eval(_block(serialized, "brands"))
    coverage = ast.literal_eval(_block(serialized, "feature_coverage_queries"))
    ordered = sorted(brands, key=lambda b: -b["confidence"])
    return HintRecord(
        top_brands=tuple(b["name"] for b in ordered[:3]),
        first_coverage_query=coverage[0] if coverage else None,
    )


def load_hint_cache(path: str | Path) -> dict[str, HintRecord]:
    """Hint records keyed by query_id."""
    hints: dict[str, HintRecord] = {}
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line:
                continue
            query_id, _, serialized = line.split("\t", 2)
            hints[query_id] = parse_hint_record(serialized)
    return hints


def build_pair_text(
    query: dict, product: dict, hints: HintRecord | None = None
) -> str:
    product_text = f"{product['title']} {product['description']}"
    if hints is None:
        return f"relevance query: {query['text']} product: {product_text}"
    enriched = hints.first_coverage_query or query["text"]
    repr_ = f"relevance query: {enriched}"
    if hints.top_brands:
        repr_ += f" brands: {', '.join(hints.top_brands)}"
    return f"{repr_} product: {product_text}"


def build_training_pairs(
    judgments: list[dict],
    products: dict[str, dict],
    queries: dict[str, dict],
    hints: dict[str, HintRecord] | None = None,
) -> list[LabeledPair]:
    """One labeled pair per judgment; target 1.0 iff "relevant and best"."""
    pairs = []
    for record in judgments:
        query = queries.get(record["query_id"])
        product = products.get(record["product_id"])
        if query is None or product is None:
            continue
        hint = hints.get(record["query_id"]) if hints else None
        pairs.append(
            LabeledPair(
                query_id=record["query_id"],
                product_id=record["product_id"],
                text=build_pair_text(query, product, hint),
                target=1.0 if record["label"] == POSITIVE_LABEL else 0.0,
            )
        )
    return pairs


def build_marker_dataset(
    n_pairs: int = 2000, seed: int = 0, marker: str = "zephyrite"
) -> list[LabeledPair]:
    """Synthetic separable data: positives contain the marker token."""
    rng = random.Random(seed)
    vocab = [f"word{i}" for i in range(50)]
    pairs = []
    for i in range(n_pairs):
        positive = i % 2 == 0
        tokens = rng.choices(vocab, k=rng.randint(4, 10))
        if positive:
            tokens.insert(rng.randrange(len(tokens) + 1), marker)
        pairs.append(
            LabeledPair(
                query_id=f"q{i % 40:02d}",
                product_id=f"p{i:05d}",
                text=f"relevance query: best gadget product: {' '.join(tokens)}",
                target=1.0 if positive else 0.0,
            )
        )
    return pairs
