"""First-stage retrieval: plain BM25, query-enhanced BM25, and dense top-k.

Query-enhanced BM25 runs one BM25 retrieval per query variant (the generated
coverage queries plus optional brand variants), keeps each variant's top
``max_candidates`` docs, and scores every doc retained by at least one
variant with the arithmetic mean over ALL variants, counting 0 for variants
that did not retain it. Variants are deliberately unweighted: every variant
contributes equally to the mean.

Run file format: one JSON object per line,
{"query_id": ..., "doc_ids": [...], "scores": [...]}.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .corpus import EmbeddingStore, SuperlativeQuery
from .errors import EmptyHints, EmptyQuery, MalformedRecord
from .hints import HintSet, top_brands
from .textindex import InvertedIndex, ScoredDoc, bm25_topk, dense_topk, tokenize


@dataclass(frozen=True)
class RankedList:
    query_id: str
    entries: tuple[ScoredDoc, ...]

    def __post_init__(self):
        ids = [e.doc_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError(f"ranked list for {self.query_id!r} has duplicate doc ids")
        for a, b in zip(self.entries, self.entries[1:]):
            out_of_order = a.score < b.score or (a.score == b.score and a.doc_id > b.doc_id)
            if out_of_order:
                raise ValueError(
                    f"ranked list for {self.query_id!r} is not sorted by "
                    "(descending score, ascending doc id)"
                )

    def __len__(self) -> int:
        return len(self.entries)

    def doc_ids(self) -> list[str]:
        return [e.doc_id for e in self.entries]


@dataclass(frozen=True)
class QEConfig:
    k: int = 50
    max_candidates: int = 50_000
    include_brand_variants: bool = True

    def __post_init__(self):
        if not 1 <= self.k <= self.max_candidates:
            raise ValueError(
                f"require 1 <= k <= max_candidates, got k={self.k}, "
                f"max_candidates={self.max_candidates}"
            )


def rank(query_id: str, scored: Sequence[ScoredDoc]) -> RankedList:
    """Sort by descending score, ties by ascending doc id, into a RankedList."""
    ordered = sorted(scored, key=lambda e: (-e.score, e.doc_id))
    return RankedList(query_id=query_id, entries=tuple(ordered))


def retrieve_bm25(index: InvertedIndex, q: SuperlativeQuery, k: int) -> RankedList:
    """Plain BM25 over the original query text, superlatives included."""
    return RankedList(
        query_id=q.id, entries=tuple(bm25_topk(index, tokenize(q.text), k))
    )


def build_variants(
    q: SuperlativeQuery, h: HintSet, cfg: QEConfig = QEConfig()
) -> list[str]:
    """Coverage queries in order, plus "brand + original query" variants.

    Duplicates are removed keeping the first occurrence so no variant is
    double-weighted in the mean.
    """
    variants = list(h.coverage_queries)
    if cfg.include_brand_variants:
        variants.extend(f"{b.name} {q.text}" for b in top_brands(h))
    seen: set[str] = set()
    unique = [v for v in variants if not (v in seen or seen.add(v))]
    if not unique:
        raise EmptyHints(f"no query variants derivable from hints for {q.id!r}")
    return unique


def retrieve_qe_bm25(
    index: InvertedIndex,
    variants: Sequence[str],
    cfg: QEConfig = QEConfig(),
    query_id: str = "",
) -> RankedList:
    """Mean-of-variants BM25 over the union of per-variant retained sets."""
    if not variants:
        raise EmptyQuery("no variants supplied")
    tokenized = [tokenize(v) for v in variants]
    if all(not tokens for tokens in tokenized):
        raise EmptyQuery("all variants tokenize to nothing")

    per_doc: dict[str, list[float]] = {}
    for tokens in tokenized:
        if not tokens:
            continue
        retained = bm25_topk(index, tokens, k=cfg.max_candidates, max_candidates=cfg.max_candidates)
        for entry in retained:
            per_doc.setdefault(entry.doc_id, []).append(entry.score)

    # fsum is exactly rounded, so the mean is invariant under variant order.
    n = len(variants)
    means = [(doc_id, math.fsum(scores) / n) for doc_id, scores in per_doc.items()]
    means.sort(key=lambda item: (-item[1], item[0]))
    entries = tuple(ScoredDoc(doc_id, score) for doc_id, score in means[: cfg.k])
    return RankedList(query_id=query_id, entries=entries)


def retrieve_dense(
    emb_store: EmbeddingStore, query_vec: Sequence[float], k: int, query_id: str = ""
) -> RankedList:
    """Exact cosine top-k, wrapped as a RankedList."""
    return RankedList(query_id=query_id, entries=tuple(dense_topk(emb_store, query_vec, k)))


# --- run files ----------------------------------------------------------------

def save_run(rankings: Sequence[RankedList], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for ranking in rankings:
            record = {
                "query_id": ranking.query_id,
                "doc_ids": [e.doc_id for e in ranking.entries],
                "scores": [e.score for e in ranking.entries],
            }
            f.write(json.dumps(record, ensure_ascii=False) + "\n")


def load_run(path: str | Path) -> list[RankedList]:
    rankings: list[RankedList] = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                entries = tuple(
                    ScoredDoc(doc_id, float(score))
                    for doc_id, score in zip(
                        record["doc_ids"], record["scores"], strict=True
                    )
                )
                rankings.append(RankedList(query_id=record["query_id"], entries=entries))
            except (KeyError, TypeError, ValueError, json.JSONDecodeError) as e:
                raise MalformedRecord(line_no, f"bad run record ({e})") from e
    return rankings
