import json
import random
from pathlib import Path

import pytest

from hintrank import errors
from hintrank.corpus import Product
from hintrank.errors import (
    EmptyHints,
    MissingBlock,
    SchemaError,
    UnclosedBlock,
)
from hintrank.hints import (
    Analysis,
    BrandHint,
    EnrichMode,
    FeatureHint,
    HintSet,
    enrich_query,
    extract_blocks,
    format_pointwise_input,
    parse_hintset,
    pointwise_query_repr,
    serialize_hintset,
    top_brands,
)

from conftest import make_query
from genhints import random_hintset

DATA = Path(__file__).parent / "data"

WELL_FORMED = """
<analysis>
{"domain": "camping tents", "ranking_intent": "durability focus", "query_clarification": "none"}
</analysis>
<brands>
[{"name": "Northpeak", "confidence": 95}, {"name": "Tundra", "confidence": 90},
 {"name": "Kestrel", "confidence": 85}, {"name": "Verano", "confidence": 80},
 {"name": "Oakfield", "confidence": 75}]
</brands>
<features>
[{"name": "waterproof", "synonyms": ["watertight"], "category": "performance",
  "importance": 9, "brands_known_for": ["Northpeak"]},
 {"name": "lightweight", "synonyms": ["light", "portable"], "category": "physical",
  "importance": 7, "brands_known_for": []},
 {"name": "durable", "synonyms": ["sturdy"], "category": "physical",
  "importance": 8, "brands_known_for": ["Tundra"]},
 {"name": "spacious", "synonyms": ["roomy"], "category": "physical",
  "importance": 5, "brands_known_for": []},
 {"name": "affordable", "synonyms": ["budget"], "category": "value",
  "importance": 3, "brands_known_for": []}]
</features>
<feature_coverage_queries>
["tent watertight light sturdy roomy budget", "tent waterproof portable durable spacious affordable",
 "q3", "q4", "q5", "q6", "q7", "q8", "q9", "q10"]
</feature_coverage_queries>
"""


class TestExtractBlocks:
    def test_all_four_blocks(self):
        blocks = extract_blocks(WELL_FORMED)
        assert set(blocks) == {"analysis", "brands", "features", "feature_coverage_queries"}

    def test_missing_brands(self):
        raw = WELL_FORMED.replace("<brands>", "<Brands>").replace("</brands>", "</Brands>")
        with pytest.raises(MissingBlock) as excinfo:
            extract_blocks(raw)
        assert excinfo.value.tag == "brands"

    def test_unclosed(self):
        raw = WELL_FORMED.replace("</features>", "")
        with pytest.raises(UnclosedBlock) as excinfo:
            extract_blocks(raw)
        assert excinfo.value.tag == "features"

    def test_stray_opener_inside_body_is_verbatim(self):
        raw = '<analysis>{"domain": "<analysis> x"}</analysis>'
        raw += WELL_FORMED  # supply the remaining blocks
        body = extract_blocks(raw)["analysis"]
        assert body == '{"domain": "<analysis> x"}'

    def test_body_stops_at_first_closer(self):
        raw = "<analysis>first</analysis><analysis>second</analysis>" + WELL_FORMED
        assert extract_blocks(raw)["analysis"] == "first"


class TestParseHintset:
    def test_well_formed(self):
        hints = parse_hintset(WELL_FORMED, expected_queries=10)
        assert len(hints.coverage_queries) == 10
        assert hints.brands[0] == BrandHint("Northpeak", 95)
        assert hints.features[0].synonyms == ("watertight",)
        assert hints.analysis.domain == "camping tents"
        assert hints.warnings == ()

    def test_confidence_out_of_range(self):
        raw = WELL_FORMED.replace('"confidence": 95', '"confidence": 120')
        with pytest.raises(SchemaError) as excinfo:
            parse_hintset(raw, 10)
        assert excinfo.value.field == "confidence"

    def test_importance_out_of_range(self):
        raw = WELL_FORMED.replace('"importance": 9', '"importance": 0')
        with pytest.raises(SchemaError) as excinfo:
            parse_hintset(raw, 10)
        assert excinfo.value.field == "importance"

    def test_coverage_count_enforced(self):
        with pytest.raises(SchemaError) as excinfo:
            parse_hintset(WELL_FORMED, expected_queries=9)
        assert excinfo.value.field == "coverage_queries"

    def test_few_entries_warn(self):
        raw = WELL_FORMED.replace(
            '[{"name": "Northpeak", "confidence": 95}, {"name": "Tundra", "confidence": 90},\n'
            ' {"name": "Kestrel", "confidence": 85}, {"name": "Verano", "confidence": 80},\n'
            ' {"name": "Oakfield", "confidence": 75}]',
            '[{"name": "Northpeak", "confidence": 95}]',
        )
        hints = parse_hintset(raw, 10)
        assert len(hints.brands) == 1
        assert any("brands" in w for w in hints.warnings)

    def test_overlong_list_truncated_with_warning(self):
        entries = ", ".join(
            f'{{"name": "B{i}", "confidence": {90 - i}}}' for i in range(12)
        )
        raw = WELL_FORMED
        start = raw.index("<brands>") + len("<brands>")
        end = raw.index("</brands>")
        raw = raw[:start] + f"[{entries}]" + raw[end:]
        hints = parse_hintset(raw, 10)
        assert len(hints.brands) == 10
        assert any("keeping the first 10" in w for w in hints.warnings)

    def test_empty_synonyms_warn(self):
        hints = parse_hintset(WELL_FORMED, 10)
        assert any("no synonyms" in w for w in hints.warnings) is False
        raw = WELL_FORMED.replace('"synonyms": ["watertight"]', '"synonyms": []')
        hints = parse_hintset(raw, 10)
        assert any("no synonyms" in w for w in hints.warnings)

    def test_totality_on_junk(self):
        rng = random.Random(99)
        for _ in range(2000):
            raw = bytes(rng.randrange(256) for _ in range(rng.randrange(64)))
            try:
                parse_hintset(raw.decode("utf-8", errors="replace"), 10)
            except errors.DataError:
                pass


class TestSerializeHintset:
    def test_roundtrip_fuzz(self):
        rng = random.Random(4)
        for _ in range(800):
            hints = random_hintset(rng)
            raw = serialize_hintset(hints)
            again = parse_hintset(raw, expected_queries=len(hints.coverage_queries))
            assert again == hints

    def test_deterministic(self):
        rng = random.Random(8)
        hints = random_hintset(rng)
        clone = HintSet(
            analysis=hints.analysis,
            brands=hints.brands,
            features=hints.features,
            coverage_queries=hints.coverage_queries,
        )
        assert serialize_hintset(hints) == serialize_hintset(clone)

    def test_quotes_in_brand_name(self):
        hints = HintSet(
            analysis=Analysis("d", "r", "q"),
            brands=(BrandHint('say "best" \\ always', 50),),
            features=(FeatureHint("f", ("s",), "c", 5),),
            coverage_queries=("cq",),
        )
        raw = serialize_hintset(hints)
        assert parse_hintset(raw, 1) == hints

    def test_single_line(self):
        rng = random.Random(15)
        for _ in range(50):
            assert "\n" not in serialize_hintset(random_hintset(rng))

    def test_embedded_closer_is_out_of_contract(self):
        # The block format cannot escape its own tags: a field containing the
        # literal closer parses to a structured error, never a crash.
        hints = HintSet(
            analysis=Analysis("</analysis>", "r", "q"),
            brands=(BrandHint("b", 50),),
            features=(FeatureHint("f", ("s",), "c", 5),),
            coverage_queries=("cq",),
        )
        with pytest.raises(errors.DataError):
            parse_hintset(serialize_hintset(hints), 1)


def hints_fixture() -> HintSet:
    return HintSet(
        analysis=Analysis("tents", "durability", "none"),
        brands=(
            BrandHint("A", 95),
            BrandHint("B", 90),
            BrandHint("C", 85),
            BrandHint("D", 40),
        ),
        features=(
            FeatureHint("waterproof", ("watertight",), "performance", 9),
            FeatureHint("lightweight", ("light",), "physical", 7),
        ),
        coverage_queries=("tent watertight light", "tent waterproof portable"),
    )


class TestEnrichQuery:
    def test_coverage_query_mode(self):
        q = make_query(text="best tent")
        assert enrich_query(q, hints_fixture(), EnrichMode.COVERAGE_QUERY) == (
            "tent watertight light"
        )

    def test_feature_augment_mode(self):
        q = make_query(text="best tent")
        out = enrich_query(q, hints_fixture(), EnrichMode.FEATURE_AUGMENT)
        assert out == "best tent waterproof lightweight"

    def test_feature_augment_with_synonyms(self):
        q = make_query(text="best tent")
        out = enrich_query(q, hints_fixture(), EnrichMode.FEATURE_AUGMENT, include_synonyms=True)
        assert out == "best tent waterproof watertight lightweight light"

    def test_importance_ties_keep_list_order(self):
        h = hints_fixture()
        tied = HintSet(
            analysis=h.analysis,
            brands=h.brands,
            features=(
                FeatureHint("zeta", (), "c", 7),
                FeatureHint("alpha", (), "c", 7),
            ),
            coverage_queries=h.coverage_queries,
        )
        q = make_query(text="best tent")
        assert enrich_query(q, tied, EnrichMode.FEATURE_AUGMENT) == "best tent zeta alpha"

    def test_empty_features_rejected(self):
        h = hints_fixture()
        empty = HintSet(h.analysis, h.brands, (), h.coverage_queries)
        with pytest.raises(EmptyHints):
            enrich_query(make_query(), empty, EnrichMode.FEATURE_AUGMENT)

    def test_empty_coverage_rejected(self):
        h = hints_fixture()
        empty = HintSet(h.analysis, h.brands, h.features, ())
        with pytest.raises(EmptyHints):
            enrich_query(make_query(), empty, EnrichMode.COVERAGE_QUERY)


class TestPointwiseFormat:
    def product(self) -> Product:
        return Product("p1", "Alpine Tent", "sleeps four, sturdy", "Outdoors", "Tents")

    def test_top3_brands_template(self):
        out = format_pointwise_input("enriched text", hints_fixture(), self.product())
        assert out == (
            "relevance query: enriched text brands: A, B, C "
            "product: Alpine Tent sleeps four, sturdy"
        )

    def test_fewer_than_three_brands(self):
        h = hints_fixture()
        two = HintSet(h.analysis, h.brands[:2], h.features, h.coverage_queries)
        out = format_pointwise_input("e", two, self.product())
        assert out == "relevance query: e brands: A, B product: Alpine Tent sleeps four, sturdy"

    def test_zero_brands_omits_segment(self):
        h = hints_fixture()
        none = HintSet(h.analysis, (), h.features, h.coverage_queries)
        out = format_pointwise_input("e", none, self.product())
        assert out == "relevance query: e product: Alpine Tent sleeps four, sturdy"

    def test_deterministic(self):
        a = format_pointwise_input("e", hints_fixture(), self.product())
        b = format_pointwise_input("e", hints_fixture(), self.product())
        assert a == b

    def test_brand_order_by_confidence_ties_by_position(self):
        h = hints_fixture()
        tied = HintSet(
            h.analysis,
            (BrandHint("X", 90), BrandHint("Y", 90), BrandHint("Z", 95)),
            h.features,
            h.coverage_queries,
        )
        out = pointwise_query_repr("e", tied)
        assert out == "relevance query: e brands: Z, X, Y"

    def test_brand_segment_permutation_invariant(self):
        # Any permutation preserving the confidence multiset and the relative
        # order of equal confidences yields the same brands segment.
        h = hints_fixture()
        base = HintSet(
            h.analysis,
            (BrandHint("X", 90), BrandHint("Y", 90), BrandHint("Z", 95), BrandHint("W", 10)),
            h.features,
            h.coverage_queries,
        )
        permuted = HintSet(
            h.analysis,
            (BrandHint("X", 90), BrandHint("Z", 95), BrandHint("Y", 90), BrandHint("W", 10)),
            h.features,
            h.coverage_queries,
        )
        assert pointwise_query_repr("e", base) == pointwise_query_repr("e", permuted)

    def test_top_brands_helper(self):
        assert [b.name for b in top_brands(hints_fixture())] == ["A", "B", "C"]


class TestGoldenSuite:
    def test_fifty_case_golden_suite(self):
        path = DATA / "hint_golden_suite.jsonl"
        cases = [json.loads(line) for line in path.read_text().splitlines() if line]
        assert len(cases) == 50
        for case in cases:
            if "error" in case:
                error_cls = getattr(errors, case["error"])
                with pytest.raises(error_cls):
                    parse_hintset(case["raw"], case["expected_queries"])
            else:
                hints = parse_hintset(case["raw"], case["expected_queries"])
                assert serialize_hintset(hints) == case["result"], case["name"]
