"""Catalog, query, judgment, and embedding ingestion.

File formats (all UTF-8):

- products.jsonl   one object per line:
    {"id": "p1", "title": "...", "description": "...",
     "parent_category": "...", "sub_category": "...", "brand": "..."}
  ("brand" is optional)
- queries.jsonl    {"id": "q1", "text": "...", "parent_category": "...",
                    "sub_category": "..."}
- judgments.jsonl  {"query_id": "q1", "product_id": "p1",
                    "label": "relevant and best" | "relevant but not best" | "irrelevant",
                    "confidence": 0-100, "reasoning": "..."}
  ("reasoning" is optional)
- embeddings.txt   first non-empty line is the dimensionality, then
                   "doc_id v1 v2 ... v_dim" per line, space-separated.

Loaded stores are immutable and safe to share across threads.
"""

from __future__ import annotations

import enum
import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import (
    DataError,
    DimMismatch,
    DuplicateId,
    EmptyDataset,
    InvalidRatios,
    MalformedRecord,
    UnknownLabel,
)
from .textindex import tokenize


@dataclass(frozen=True, slots=True)
class Product:
    id: str
    title: str
    description: str
    parent_category: str
    sub_category: str
    brand: str | None = None

    def __post_init__(self):
        if not self.id:
            raise DataError("product id must be nonempty")
        if not self.title:
            raise DataError(f"product {self.id!r}: title must be nonempty")

    @property
    def text(self) -> str:
        """Title and description joined by a single space (default field policy)."""
        return f"{self.title} {self.description}"


@dataclass(frozen=True, slots=True)
class SuperlativeQuery:
    id: str
    text: str
    parent_category: str
    sub_category: str

    def __post_init__(self):
        if not self.text or not tokenize(self.text):
            raise DataError(f"query {self.id!r}: text must contain at least one token")


class RelevanceLabel(enum.Enum):
    RELEVANT_AND_BEST = "relevant and best"
    RELEVANT_NOT_BEST = "relevant but not best"
    IRRELEVANT = "irrelevant"

    @classmethod
    def from_string(cls, value: str) -> "RelevanceLabel":
        for label in cls:
            if label.value == value:
                return label
        raise UnknownLabel(value)


DEFAULT_POSITIVE_LABELS = frozenset({RelevanceLabel.RELEVANT_AND_BEST})


@dataclass(frozen=True, slots=True)
class RelevanceJudgment:
    query_id: str
    product_id: str
    label: RelevanceLabel
    confidence: int
    reasoning: str | None = None

    def __post_init__(self):
        if not 0 <= self.confidence <= 100:
            raise DataError(
                f"judgment ({self.query_id!r}, {self.product_id!r}): "
                f"confidence {self.confidence} outside [0, 100]"
            )


class SplitName(enum.Enum):
    TRAIN = "train"
    DEV = "dev"
    TEST = "test"


@dataclass(frozen=True)
class DatasetSplit:
    name: SplitName
    query_ids: frozenset[str]

    def __len__(self) -> int:
        return len(self.query_ids)


class ProductStore:
    """Immutable id-keyed product collection preserving file order."""

    def __init__(self, products: Iterable[Product]):
        self._by_id: dict[str, Product] = {}
        for p in products:
            if p.id in self._by_id:
                raise DuplicateId(p.id)
            self._by_id[p.id] = p

    def __len__(self) -> int:
        return len(self._by_id)

    def __iter__(self) -> Iterator[Product]:
        return iter(self._by_id.values())

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._by_id

    def __eq__(self, other) -> bool:
        return isinstance(other, ProductStore) and self._by_id == other._by_id

    def get(self, doc_id: str) -> Product:
        return self._by_id[doc_id]

    def ids(self) -> list[str]:
        return list(self._by_id)


class JudgmentSet:
    """Judgments grouped by query id, preserving overall file order."""

    def __init__(self, judgments: Iterable[RelevanceJudgment]):
        self._ordered: list[RelevanceJudgment] = list(judgments)
        self._by_query: dict[str, list[RelevanceJudgment]] = {}
        for j in self._ordered:
            self._by_query.setdefault(j.query_id, []).append(j)

    def __len__(self) -> int:
        return len(self._ordered)

    def __eq__(self, other) -> bool:
        return isinstance(other, JudgmentSet) and self._ordered == other._ordered

    def query_ids(self) -> list[str]:
        return list(self._by_query)

    def group(self, query_id: str) -> list[RelevanceJudgment]:
        return list(self._by_query.get(query_id, ()))

    def pair_count(self, query_id: str) -> int:
        return len(self._by_query.get(query_id, ()))

    def positive_ids(
        self,
        query_id: str,
        positive_labels: frozenset[RelevanceLabel] = DEFAULT_POSITIVE_LABELS,
    ) -> set[str]:
        return {
            j.product_id
            for j in self._by_query.get(query_id, ())
            if j.label in positive_labels
        }

    def all(self) -> Iterator[RelevanceJudgment]:
        return iter(self._ordered)


class EmbeddingStore:
    """Dense vectors keyed by doc id; all rows share one dimensionality."""

    def __init__(self, dim: int, vectors: Mapping[str, Sequence[float]]):
        if dim <= 0:
            raise DataError(f"embedding dim must be positive, got {dim}")
        self.dim = dim
        self.ids: tuple[str, ...] = tuple(vectors)
        matrix = np.zeros((len(self.ids), dim), dtype=np.float64)
        for row, doc_id in enumerate(self.ids):
            vec = np.asarray(vectors[doc_id], dtype=np.float64)
            if vec.shape != (dim,):
                raise DimMismatch(dim, int(vec.shape[0]) if vec.ndim == 1 else -1)
            if not np.all(np.isfinite(vec)):
                raise DataError(f"embedding {doc_id!r} has non-finite components")
            matrix[row] = vec
        self.matrix = matrix
        self._row: dict[str, int] = {doc_id: i for i, doc_id in enumerate(self.ids)}

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._row

    def vector(self, doc_id: str) -> np.ndarray:
        return self.matrix[self._row[doc_id]]


# --- loading / saving -------------------------------------------------------

def _read_records(path: str | Path) -> Iterator[tuple[int, dict]]:
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise MalformedRecord(line_no, f"invalid JSON ({e.msg})") from e
            if not isinstance(record, dict):
                raise MalformedRecord(line_no, "record is not an object")
            yield line_no, record


def _require(record: dict, key: str, line_no: int) -> str:
    value = record.get(key)
    if not isinstance(value, str):
        raise MalformedRecord(line_no, f"missing or non-string field {key!r}")
    return value


def load_products(path: str | Path) -> ProductStore:
    """Load a products.jsonl file into a ProductStore."""
    def gen():
        for line_no, record in _read_records(path):
            brand = record.get("brand")
            if brand is not None and not isinstance(brand, str):
                raise MalformedRecord(line_no, "field 'brand' must be a string")
            try:
                yield Product(
                    id=_require(record, "id", line_no),
                    title=_require(record, "title", line_no),
                    description=_require(record, "description", line_no),
                    parent_category=_require(record, "parent_category", line_no),
                    sub_category=_require(record, "sub_category", line_no),
                    brand=brand,
                )
            except DataError as e:
                if isinstance(e, (MalformedRecord, DuplicateId)):
                    raise
                raise MalformedRecord(line_no, str(e)) from e

    return ProductStore(gen())


def save_products(store: ProductStore, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for p in store:
            record = {
                "id": p.id,
                "title": p.title,
                "description": p.description,
                "parent_category": p.parent_category,
                "sub_category": p.sub_category,
            }
            if p.brand is not None:
                record["brand"] = p.brand
            f.write(json.dumps(record, ensure_ascii=False) + "\n")


def load_queries(path: str | Path) -> list[SuperlativeQuery]:
    queries: list[SuperlativeQuery] = []
    seen: set[str] = set()
    for line_no, record in _read_records(path):
        qid = _require(record, "id", line_no)
        if qid in seen:
            raise DuplicateId(qid)
        seen.add(qid)
        try:
            queries.append(
                SuperlativeQuery(
                    id=qid,
                    text=_require(record, "text", line_no),
                    parent_category=_require(record, "parent_category", line_no),
                    sub_category=_require(record, "sub_category", line_no),
                )
            )
        except DataError as e:
            if isinstance(e, MalformedRecord):
                raise
            raise MalformedRecord(line_no, str(e)) from e
    return queries


def save_queries(queries: Iterable[SuperlativeQuery], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for q in queries:
            record = {
                "id": q.id,
                "text": q.text,
                "parent_category": q.parent_category,
                "sub_category": q.sub_category,
            }
            f.write(json.dumps(record, ensure_ascii=False) + "\n")


def load_judgments(path: str | Path) -> JudgmentSet:
    """Load a judgments.jsonl file, grouped by query id."""
    def gen():
        for line_no, record in _read_records(path):
            confidence = record.get("confidence")
            if not isinstance(confidence, int) or isinstance(confidence, bool):
                raise MalformedRecord(line_no, "field 'confidence' must be an integer")
            reasoning = record.get("reasoning")
            if reasoning is not None and not isinstance(reasoning, str):
                raise MalformedRecord(line_no, "field 'reasoning' must be a string")
            try:
                yield RelevanceJudgment(
                    query_id=_require(record, "query_id", line_no),
                    product_id=_require(record, "product_id", line_no),
                    label=RelevanceLabel.from_string(_require(record, "label", line_no)),
                    confidence=confidence,
                    reasoning=reasoning,
                )
            except UnknownLabel:
                raise
            except DataError as e:
                if isinstance(e, MalformedRecord):
                    raise
                raise MalformedRecord(line_no, str(e)) from e

    return JudgmentSet(gen())


def save_judgments(judgments: JudgmentSet, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for j in judgments.all():
            record = {
                "query_id": j.query_id,
                "product_id": j.product_id,
                "label": j.label.value,
                "confidence": j.confidence,
            }
            if j.reasoning is not None:
                record["reasoning"] = j.reasoning
            f.write(json.dumps(record, ensure_ascii=False) + "\n")


def load_embeddings(path: str | Path) -> EmbeddingStore:
    dim: int | None = None
    vectors: dict[str, list[float]] = {}
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            if dim is None:
                try:
                    dim = int(line)
                except ValueError:
                    raise MalformedRecord(line_no, "header must be the integer dim")
                if dim <= 0:
                    raise MalformedRecord(line_no, f"dim must be positive, got {dim}")
                continue
            parts = line.split()
            if len(parts) != dim + 1:
                raise MalformedRecord(
                    line_no, f"expected doc_id plus {dim} values, got {len(parts) - 1}"
                )
            doc_id = parts[0]
            if doc_id in vectors:
                raise DuplicateId(doc_id)
            try:
                vec = [float(v) for v in parts[1:]]
            except ValueError:
                raise MalformedRecord(line_no, "non-numeric vector component")
            if not all(math.isfinite(v) for v in vec):
                raise MalformedRecord(line_no, "non-finite vector component")
            vectors[doc_id] = vec
    if dim is None:
        raise MalformedRecord(0, "empty embeddings file (missing dim header)")
    return EmbeddingStore(dim, vectors)


def save_embeddings(store: EmbeddingStore, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"{store.dim}\n")
        for doc_id in store.ids:
            values = " ".join(repr(float(v)) for v in store.vector(doc_id))
            f.write(f"{doc_id} {values}\n")


# --- splitting ---------------------------------------------------------------

# Width of the relevant-but-not-best count bucket used as a stratum component.
_RNB_BUCKET = 5


def stratified_split(
    judgments: JudgmentSet,
    ratios: tuple[float, float, float],
    seed: int,
    queries: Sequence[SuperlativeQuery] | None = None,
) -> tuple[DatasetSplit, DatasetSplit, DatasetSplit]:
    """Split the judged queries into train/dev/test with label balance.

    Strata combine the per-query count of "relevant and best" items, a
    bucketed count of "relevant but not best" items, and (when ``queries``
    metadata is supplied) the parent category. Queries are walked stratum by
    stratum in seeded-shuffle order and each one goes to the split furthest
    behind its running quota, so rounding remainders carry across strata
    (adjacent strata have near-identical label profiles) instead of starving
    the small splits. Deterministic for a fixed (judgments, ratios, seed).
    """
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise InvalidRatios(f"ratios must be three nonnegative reals summing to 1: {ratios}")
    query_ids = judgments.query_ids()
    if not query_ids:
        raise EmptyDataset("no judged queries to split")

    category = {}
    if queries is not None:
        category = {q.id: q.parent_category for q in queries}

    strata: dict[tuple, list[str]] = {}
    for qid in query_ids:
        group = judgments.group(qid)
        rb = sum(1 for j in group if j.label is RelevanceLabel.RELEVANT_AND_BEST)
        rnb = sum(1 for j in group if j.label is RelevanceLabel.RELEVANT_NOT_BEST)
        key = (rb, rnb // _RNB_BUCKET, category.get(qid, ""))
        strata.setdefault(key, []).append(qid)

    rng = random.Random(seed)
    assigned: list[list[str]] = [[], [], []]
    processed = 0
    for key in sorted(strata):
        members = sorted(strata[key])
        rng.shuffle(members)
        for qid in members:
            processed += 1
            deficits = [processed * ratios[i] - len(assigned[i]) for i in range(3)]
            split_idx = max(range(3), key=lambda i: (deficits[i], -i))
            assigned[split_idx].append(qid)

    names = (SplitName.TRAIN, SplitName.DEV, SplitName.TEST)
    return tuple(
        DatasetSplit(name=names[i], query_ids=frozenset(assigned[i])) for i in range(3)
    )


# --- validation --------------------------------------------------------------

EXPECTED_PAIRS_PER_QUERY = 50
MAX_RELEVANT_PER_QUERY = 14


@dataclass(frozen=True)
class Violation:
    kind: str
    query_id: str
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    n_queries: int
    n_pairs: int
    violations: tuple[Violation, ...] = field(default=())

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_dataset(
    store: ProductStore,
    queries: Sequence[SuperlativeQuery],
    judgments: JudgmentSet,
    positive_labels: frozenset[RelevanceLabel] = DEFAULT_POSITIVE_LABELS,
) -> ValidationReport:
    """Check the judged dataset against its structural contract.

    Violation kinds: "pair-count" (not exactly 50 judged pairs),
    "missing-product" (judged product absent from the store),
    "no-relevant" / "too-many-relevant" (positive count outside [1, 14]),
    and "unknown-query" (judgments for a query id missing from ``queries``).
    """
    violations: list[Violation] = []
    known = {q.id for q in queries}
    for qid in judgments.query_ids():
        if qid not in known:
            violations.append(Violation("unknown-query", qid, "judgments for unknown query"))

    for q in queries:
        group = judgments.group(q.id)
        if len(group) != EXPECTED_PAIRS_PER_QUERY:
            violations.append(
                Violation(
                    "pair-count",
                    q.id,
                    f"{len(group)} judged pairs, expected {EXPECTED_PAIRS_PER_QUERY}",
                )
            )
        for j in group:
            if j.product_id not in store:
                violations.append(
                    Violation("missing-product", q.id, f"product {j.product_id!r} not in store")
                )
        positives = sum(1 for j in group if j.label in positive_labels)
        if positives < 1:
            violations.append(Violation("no-relevant", q.id, "0 positive items"))
        elif positives > MAX_RELEVANT_PER_QUERY:
            violations.append(
                Violation(
                    "too-many-relevant",
                    q.id,
                    f"{positives} positive items, max {MAX_RELEVANT_PER_QUERY}",
                )
            )

    return ValidationReport(
        n_queries=len(queries), n_pairs=len(judgments), violations=tuple(violations)
    )
