"""Ranking metrics, stratified breakdowns, coverage analysis, latency stats.

The positive class defaults to "relevant and best" only; queries with zero
positives are skipped (they are filtered upstream of a well-formed dataset)
and counted in the report. Percentiles use the nearest-rank method:
the ceil(p*n)-th order statistic, 1-indexed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import (
    DEFAULT_POSITIVE_LABELS,
    JudgmentSet,
    RelevanceLabel,
    SuperlativeQuery,
)
from .errors import EmptySamples, MissingJudgments, UnknownKey
from .retrieval import RankedList

PRECISION_CUTOFFS = (1, 3, 5, 10)
DEFAULT_DEPTH = 50
MIN_GROUP_QUERIES = 10


@dataclass(frozen=True)
class PositiveSetConfig:
    positive_labels: frozenset[RelevanceLabel] = DEFAULT_POSITIVE_LABELS

    def __post_init__(self):
        if not self.positive_labels:
            raise ValueError("positive_labels must be a nonempty set of labels")


@dataclass(frozen=True)
class MetricReport:
    p_at: Mapping[int, float]
    map_score: float
    mrr: float
    n_queries: int
    n_skipped: int = 0

    def as_record(self) -> dict:
        return {
            **{f"p@{k}": self.p_at[k] for k in sorted(self.p_at)},
            "map": self.map_score,
            "mrr": self.mrr,
            "n_queries": self.n_queries,
            "n_skipped": self.n_skipped,
        }


@dataclass(frozen=True)
class LatencySample:
    query_id: str
    seconds: float
    stages: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.seconds <= 0:
            raise ValueError(f"latency must be positive, got {self.seconds}")
        if sum(self.stages.values()) > self.seconds + 1e-6:
            raise ValueError(
                f"stage sum {sum(self.stages.values()):.6f} exceeds total {self.seconds:.6f}"
            )


# --- core metrics ---------------------------------------------------------------

def precision_at_k(ranking: Sequence[str], positives: set[str], k: int) -> float:
    """|top-min(k, len) ∩ positives| / k; the denominator stays k regardless."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    hits = sum(1 for doc_id in ranking[:k] if doc_id in positives)
    return hits / k


def average_precision(ranking: Sequence[str], positives: set[str]) -> float:
    """Mean of precision at each positive's rank; unretrieved positives add 0."""
    if not positives:
        raise ValueError("average_precision requires a nonempty positive set")
    hits = 0
    total = 0.0
    for rank, doc_id in enumerate(ranking, start=1):
        if doc_id in positives:
            hits += 1
            total += hits / rank
    return total / len(positives)


def reciprocal_rank(ranking: Sequence[str], positives: set[str]) -> float:
    for rank, doc_id in enumerate(ranking, start=1):
        if doc_id in positives:
            return 1.0 / rank
    return 0.0


def mrr(per_query: Iterable[tuple[Sequence[str], set[str]]]) -> float:
    """Mean reciprocal rank over queries; zero-positive queries are skipped."""
    values = [reciprocal_rank(r, pos) for r, pos in per_query if pos]
    if not values:
        raise ValueError("mrr requires at least one query with positives")
    return sum(values) / len(values)


def evaluate_run(
    run: Sequence[RankedList],
    judgments: JudgmentSet,
    cfg: PositiveSetConfig = PositiveSetConfig(),
    depth: int = DEFAULT_DEPTH,
) -> MetricReport:
    """Score a run against judgments, truncating each ranking at ``depth``.

    Docs without a judgment count as non-positive. A run query with no
    judgments at all is an error; one whose positives are empty is skipped.
    """
    if not run:
        raise ValueError("run is empty")
    p_sums = {k: 0.0 for k in PRECISION_CUTOFFS}
    ap_sum = 0.0
    rr_sum = 0.0
    scored = 0
    skipped = 0
    for ranking in run:
        if not judgments.group(ranking.query_id):
            raise MissingJudgments(ranking.query_id)
        positives = judgments.positive_ids(ranking.query_id, cfg.positive_labels)
        if not positives:
            skipped += 1
            continue
        docs = ranking.doc_ids()[:depth]
        for k in PRECISION_CUTOFFS:
            p_sums[k] += precision_at_k(docs, positives, k)
        ap_sum += average_precision(docs, positives)
        rr_sum += reciprocal_rank(docs, positives)
        scored += 1
    if scored == 0:
        raise ValueError("no query had positives; nothing to score")
    return MetricReport(
        p_at={k: p_sums[k] / scored for k in PRECISION_CUTOFFS},
        map_score=ap_sum / scored,
        mrr=rr_sum / scored,
        n_queries=scored,
        n_skipped=skipped,
    )


# --- breakdowns -------------------------------------------------------------------

@dataclass(frozen=True)
class GroupReport:
    group: str
    report: MetricReport
    flagged: bool  # fewer than 10 queries; dropped from default tables


def breakdown_by(
    run: Sequence[RankedList],
    judgments: JudgmentSet,
    key: str,
    queries: Sequence[SuperlativeQuery] | None = None,
    cfg: PositiveSetConfig = PositiveSetConfig(),
    depth: int = DEFAULT_DEPTH,
) -> list[GroupReport]:
    """Per-group metric reports, grouped by parent_category or n_relevant."""
    if key == "parent_category":
        if queries is None:
            raise UnknownKey("parent_category breakdown requires query metadata")
        category = {q.id: q.parent_category for q in queries}
        def group_of(ranking: RankedList) -> str:
            if ranking.query_id not in category:
                raise UnknownKey(f"no category for query {ranking.query_id!r}")
            return category[ranking.query_id]
    elif key == "n_relevant":
        def group_of(ranking: RankedList) -> str:
            return str(len(judgments.positive_ids(ranking.query_id, cfg.positive_labels)))
    else:
        raise UnknownKey(f"unknown grouping key: {key!r}")

    grouped: dict[str, list[RankedList]] = {}
    for ranking in run:
        grouped.setdefault(group_of(ranking), []).append(ranking)

    reports = []
    for group in sorted(grouped):
        members = grouped[group]
        reports.append(
            GroupReport(
                group=group,
                report=evaluate_run(members, judgments, cfg, depth),
                flagged=len(members) < MIN_GROUP_QUERIES,
            )
        )
    return reports


# --- coverage analysis --------------------------------------------------------------

@dataclass(frozen=True)
class CoverageRow:
    k: int
    avg_coverage: float
    perfect_coverage: float


def coverage_analysis(
    variant_pools: Mapping[str, Sequence[Sequence[str]]],
    judgments: JudgmentSet,
    ks: Sequence[int],
    cfg: PositiveSetConfig = PositiveSetConfig(),
    priority_scores: Mapping[str, Mapping[str, float]] | None = None,
    priority_depth: int = 10,
) -> list[CoverageRow]:
    """Candidate-pool coverage of the relevant docs at growing per-variant k.

    ``variant_pools[qid]`` holds one ranked doc-id list per query variant.
    For each k the pool is the union of every variant's top-k. avg_coverage
    averages |relevant ∩ pool| / |relevant| over queries; perfect_coverage is
    the fraction of queries whose highest-priority relevant docs (top
    ``priority_depth`` by ``priority_scores`` when given, else all relevant)
    are entirely inside the pool.
    """
    if list(ks) != sorted(ks) or len(set(ks)) != len(ks):
        raise ValueError("ks must be strictly ascending")
    rows = []
    for k in ks:
        coverages = []
        perfect = 0
        for qid, pools in variant_pools.items():
            relevant = judgments.positive_ids(qid, cfg.positive_labels)
            if not relevant:
                continue
            pool: set[str] = set()
            for variant_docs in pools:
                pool.update(variant_docs[:k])
            coverages.append(len(relevant & pool) / len(relevant))
            must_find = relevant
            if priority_scores is not None and qid in priority_scores:
                scores = priority_scores[qid]
                must_find = set(
                    sorted(relevant, key=lambda d: (-scores.get(d, float("-inf")), d))[
                        :priority_depth
                    ]
                )
            if must_find <= pool:
                perfect += 1
        if not coverages:
            raise ValueError("no query with positives in the coverage pools")
        rows.append(
            CoverageRow(
                k=k,
                avg_coverage=sum(coverages) / len(coverages),
                perfect_coverage=perfect / len(coverages),
            )
        )
    return rows


# --- latency statistics ----------------------------------------------------------------

def nearest_rank(values: Sequence[float], p: float) -> float:
    """ceil(p*n)-th order statistic (1-indexed), the nearest-rank percentile."""
    if not values:
        raise EmptySamples("no samples")
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must be in (0, 1], got {p}")
    ordered = sorted(values)
    rank = max(1, math.ceil(p * len(ordered)))
    return ordered[rank - 1]


def latency_stats(samples: Sequence[LatencySample]) -> tuple[float, float, float]:
    """(average, p5, p95) of the per-query totals."""
    if not samples:
        raise EmptySamples("no latency samples")
    seconds = [s.seconds for s in samples]
    return (sum(seconds) / len(seconds), nearest_rank(seconds, 0.05), nearest_rank(seconds, 0.95))


def stage_latency_stats(samples: Sequence[LatencySample]) -> dict[str, tuple[float, float, float]]:
    """Per-stage (avg, p5, p95), plus the totals under the key "total"."""
    if not samples:
        raise EmptySamples("no latency samples")
    stages: dict[str, list[float]] = {}
    for sample in samples:
        for stage, value in sample.stages.items():
            stages.setdefault(stage, []).append(value)
    out = {
        stage: (sum(vals) / len(vals), nearest_rank(vals, 0.05), nearest_rank(vals, 0.95))
        for stage, vals in sorted(stages.items())
    }
    out["total"] = latency_stats(samples)
    return out


# --- report rendering ---------------------------------------------------------------

METRIC_COLUMNS = ("p@1", "p@3", "p@5", "p@10", "map", "mrr")


def render_metric_table(
    rows: Sequence[tuple[str, MetricReport]],
    metrics: Sequence[str] | None = None,
) -> str:
    """Plain-text table with P@1/P@3/P@5/P@10, MAP, MRR columns (percent)."""
    selected = list(metrics) if metrics else list(METRIC_COLUMNS)
    unknown = [m for m in selected if m not in METRIC_COLUMNS]
    if unknown:
        raise UnknownKey(f"unknown metric(s): {', '.join(unknown)}")
    header = ["System", *(m.upper() for m in selected), "Queries"]
    table = [header]
    for name, report in rows:
        record = report.as_record()
        table.append(
            [
                name,
                *(f"{100 * record[m]:.2f}" for m in selected),
                str(report.n_queries),
            ]
        )
    widths = [max(len(row[i]) for row in table) for i in range(len(header))]
    lines = []
    for row in table:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
    return "\n".join(lines)


def render_coverage_table(rows: Sequence[CoverageRow]) -> str:
    lines = ["Search k  Avg. Coverage  Perfect Coverage"]
    for row in rows:
        lines.append(
            f"{row.k:<8d}  {100 * row.avg_coverage:>12.2f}%  {100 * row.perfect_coverage:>15.2f}%"
        )
    return "\n".join(lines)


def render_latency_table(stats: Mapping[str, tuple[float, float, float]]) -> str:
    lines = ["Stage      Avg      p5       p95"]
    for stage, (avg, p5, p95) in stats.items():
        lines.append(f"{stage:<9s}  {avg:<7.3f}  {p5:<7.3f}  {p95:<7.3f}")
    return "\n".join(lines)


def save_report_records(rows: Sequence[tuple[str, MetricReport]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for name, report in rows:
            f.write(json.dumps({"system": name, **report.as_record()}) + "\n")
