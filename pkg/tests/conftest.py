import random

import pytest

from hintrank.corpus import (
    JudgmentSet,
    Product,
    ProductStore,
    RelevanceJudgment,
    RelevanceLabel,
    SuperlativeQuery,
)

VOCAB = (
    "red blue green metal plastic foam large small round square balloon shoe "
    "tent lamp speaker camera jacket towel lock pen chair table rug mug fan "
    "light durable soft bright quiet fast heavy slim wide deluxe classic"
).split()


def random_store(rng: random.Random, n_docs: int, vocab=VOCAB) -> ProductStore:
    products = []
    for i in range(n_docs):
        title = " ".join(rng.choices(vocab, k=rng.randint(2, 5)))
        description = " ".join(rng.choices(vocab, k=rng.randint(3, 10)))
        products.append(
            Product(
                id=f"d{i:04d}",
                title=title,
                description=description,
                parent_category="Test",
                sub_category="Things",
            )
        )
    return ProductStore(products)


def random_query_text(rng: random.Random, vocab=VOCAB) -> str:
    return " ".join(rng.choices(vocab, k=rng.randint(1, 4)))


def make_query(qid: str = "q1", text: str = "best balloons") -> SuperlativeQuery:
    return SuperlativeQuery(
        id=qid, text=text, parent_category="Toys", sub_category="Balloons"
    )


def judgments_for(qid: str, positives: list[str], negatives: list[str]) -> JudgmentSet:
    records = [
        RelevanceJudgment(qid, p, RelevanceLabel.RELEVANT_AND_BEST, 90) for p in positives
    ] + [RelevanceJudgment(qid, n, RelevanceLabel.IRRELEVANT, 90) for n in negatives]
    return JudgmentSet(records)


@pytest.fixture
def tiny_store() -> ProductStore:
    return ProductStore(
        [
            Product("d1", "best balloons", "", "Party", "Balloons"),
            Product("d2", "balloons", "", "Party", "Balloons"),
            Product("d3", "shoes", "", "Clothing", "Shoes"),
        ]
    )


def write_corpus_files(tmp_path, n_docs=40, n_queries=4, seed=0):
    """Write a small coherent products/queries/judgments trio for pipeline runs."""
    from hintrank.corpus import save_judgments, save_products, save_queries
    from hintrank.corpus import JudgmentSet, RelevanceJudgment, RelevanceLabel

    rng = random.Random(seed)
    nouns = ["balloons", "tents", "speakers", "towels", "lamps", "jackets"]
    products = []
    for i in range(n_docs):
        noun = nouns[i % len(nouns)]
        filler = " ".join(rng.choices(VOCAB, k=4))
        products.append(
            Product(
                id=f"d{i:03d}",
                title=f"{noun} model {i}",
                description=f"{filler} {noun}",
                parent_category="Home",
                sub_category=noun,
            )
        )
    store = ProductStore(products)
    queries = [
        SuperlativeQuery(
            id=f"q{i:02d}",
            text=f"best {nouns[i % len(nouns)]}",
            parent_category="Home",
            sub_category=nouns[i % len(nouns)],
        )
        for i in range(n_queries)
    ]
    judgments = []
    for q in queries:
        noun = q.sub_category
        matching = [p for p in products if p.sub_category == noun]
        for j, p in enumerate(matching):
            label = (
                RelevanceLabel.RELEVANT_AND_BEST
                if j < 2
                else RelevanceLabel.RELEVANT_NOT_BEST
            )
            judgments.append(RelevanceJudgment(q.id, p.id, label, 85))
    save_products(store, tmp_path / "products.jsonl")
    save_queries(queries, tmp_path / "queries.jsonl")
    save_judgments(JudgmentSet(judgments), tmp_path / "judgments.jsonl")
    return store, queries


def write_config(tmp_path, **overrides):
    """Write a pipeline INI config; overrides use 'section.key' names."""
    values = {
        "corpus.products": str(tmp_path / "products.jsonl"),
        "corpus.queries": str(tmp_path / "queries.jsonl"),
        "corpus.judgments": str(tmp_path / "judgments.jsonl"),
        "hintgen.provider": "mock",
        "hintgen.seed": "7",
        "retrieval.retriever": "bm25",
        "retrieval.k": "10",
        "retrieval.max_candidates": "1000",
        "rerank.reranker": "none",
        "rerank.scorer": "lexical",
        "pipeline.worker_count": "2",
        "pipeline.seed": "0",
    }
    values.update(overrides)
    sections: dict[str, dict[str, str]] = {}
    for dotted, value in values.items():
        if value is None:
            continue
        section, key = dotted.split(".", 1)
        sections.setdefault(section, {})[key] = value
    lines = []
    for section in sections:
        lines.append(f"[{section}]")
        lines.extend(f"{k} = {v}" for k, v in sections[section].items())
        lines.append("")
    path = tmp_path / "pipeline.ini"
    path.write_text("\n".join(lines), encoding="utf-8")
    return path
