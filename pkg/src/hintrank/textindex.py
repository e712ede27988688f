"""Tokenization, inverted index with Okapi BM25, and exact dense top-k.

BM25 uses k1=1.2, b=0.75 and the smoothed nonnegative idf
ln(1 + (N - df + 0.5) / (df + 0.5)). Query tokens are treated as a multiset:
a term appearing twice in the query contributes twice. Indexes are immutable
once built and safe for concurrent readers.
"""

from __future__ import annotations

import math
import pickle
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Callable, Sequence

import numpy as np

from .errors import DataError, DimMismatch, EmptyQuery, EmptyStore, ZeroVector

if TYPE_CHECKING:
    from .corpus import EmbeddingStore, Product, ProductStore

BM25_K1 = 1.2
BM25_B = 0.75

# Alphanumeric runs (unicode letters and digits, underscore excluded).
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase and split on any non-alphanumeric run; no stemming or stopwords."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True, slots=True)
class ScoredDoc:
    doc_id: str
    score: float

    def __post_init__(self):
        if not math.isfinite(self.score):
            raise DataError(f"non-finite score for doc {self.doc_id!r}")


class InvertedIndex:
    """Term -> (doc_id, term_frequency) postings plus per-doc length stats."""

    def __init__(
        self,
        postings: dict[str, list[tuple[str, int]]],
        doc_len: dict[str, int],
    ):
        if not doc_len:
            raise EmptyStore("index over zero documents")
        self.postings = postings
        self.doc_len = doc_len
        self.doc_count = len(doc_len)
        self.avg_doc_len = sum(doc_len.values()) / len(doc_len)

    def df(self, term: str) -> int:
        return len(self.postings.get(term, ()))

    def idf(self, term: str) -> float:
        df = self.df(term)
        return math.log(1.0 + (self.doc_count - df + 0.5) / (df + 0.5))


def build_index(
    store: "ProductStore",
    field_policy: Callable[["Product"], str] | None = None,
) -> InvertedIndex:
    """Index every product; default field policy is title + " " + description."""
    if len(store) == 0:
        raise EmptyStore("cannot index an empty product store")
    if field_policy is None:
        field_policy = lambda p: p.text

    postings: dict[str, list[tuple[str, int]]] = {}
    doc_len: dict[str, int] = {}
    for product in store:
        tokens = tokenize(field_policy(product))
        doc_len[product.id] = len(tokens)
        for term, tf in Counter(tokens).items():
            postings.setdefault(term, []).append((product.id, tf))
    for plist in postings.values():
        plist.sort(key=lambda entry: entry[0])
    return InvertedIndex(postings, doc_len)


def bm25_topk(
    index: InvertedIndex,
    query_tokens: Sequence[str],
    k: int,
    max_candidates: int | None = None,
) -> list[ScoredDoc]:
    """Top-k docs by BM25 among those sharing at least one query term.

    At most ``max_candidates`` docs are retained (the retention set used by
    query-enhanced retrieval); ties break by ascending doc id.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if max_candidates is not None and max_candidates < k:
        raise ValueError(f"max_candidates {max_candidates} < k {k}")
    if not query_tokens:
        raise EmptyQuery("query has no tokens")

    accum: dict[str, float] = {}
    for term, qtf in Counter(query_tokens).items():
        plist = index.postings.get(term)
        if not plist:
            continue
        idf = index.idf(term)
        for doc_id, tf in plist:
            dl = index.doc_len[doc_id]
            norm = BM25_K1 * (1.0 - BM25_B + BM25_B * dl / index.avg_doc_len)
            contrib = qtf * idf * tf * (BM25_K1 + 1.0) / (tf + norm)
            accum[doc_id] = accum.get(doc_id, 0.0) + contrib

    ranked = sorted(accum.items(), key=lambda item: (-item[1], item[0]))
    if max_candidates is not None:
        ranked = ranked[:max_candidates]
    return [ScoredDoc(doc_id, score) for doc_id, score in ranked[:k]]


def dense_topk(emb_store: "EmbeddingStore", query_vector: Sequence[float], k: int) -> list[ScoredDoc]:
    """Exact cosine-similarity top-k over the embedding store.

    Zero-norm document rows score 0.0; ties break by ascending doc id.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    q = np.asarray(query_vector, dtype=np.float64)
    if q.shape != (emb_store.dim,):
        raise DimMismatch(emb_store.dim, int(q.shape[0]) if q.ndim == 1 else -1)
    qnorm = float(np.linalg.norm(q))
    if qnorm == 0.0:
        raise ZeroVector("query vector has zero norm")

    doc_norms = np.linalg.norm(emb_store.matrix, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        scores = (emb_store.matrix @ q) / (doc_norms * qnorm)
    scores = np.where(doc_norms == 0.0, 0.0, scores)

    order = sorted(range(len(emb_store.ids)), key=lambda i: (-scores[i], emb_store.ids[i]))
    return [ScoredDoc(emb_store.ids[i], float(scores[i])) for i in order[:k]]


# --- binary snapshot (internal, versioned) -----------------------------------

_SNAPSHOT_FORMAT = "hintrank-index"
_SNAPSHOT_VERSION = 1


def save_index(index: InvertedIndex, path: str | Path) -> None:
    payload = {
        "format": _SNAPSHOT_FORMAT,
        "version": _SNAPSHOT_VERSION,
        "postings": index.postings,
        "doc_len": index.doc_len,
    }
    with open(path, "wb") as f:
        pickle.dump(payload, f, protocol=pickle.HIGHEST_PROTOCOL)


def load_index(path: str | Path) -> InvertedIndex:
    with open(path, "rb") as f:
        payload = pickle.load(f)
    if not isinstance(payload, dict) or payload.get("format") != _SNAPSHOT_FORMAT:
        raise DataError(f"{path}: not an index snapshot")
    if payload.get("version") != _SNAPSHOT_VERSION:
        raise DataError(f"{path}: unsupported snapshot version {payload.get('version')}")
    return InvertedIndex(payload["postings"], payload["doc_len"])
