from pathlib import Path

import pytest

from hintrank.errors import MissingBinding
from hintrank.prompts import TEMPLATES, PromptTemplate, render

DATA = Path(__file__).parent / "data"


class TestRender:
    def test_query_generation_bindings(self):
        out = render(TEMPLATES["query_generation"], {"n": 50, "noun": "balloons"})
        assert "Generate 50 distinct" in out
        assert "balloons" in out
        assert "{n}" not in out and "{noun}" not in out

    def test_hint_generation_requests_exact_count(self):
        out = render(TEMPLATES["hint_generation"], {"num_queries": 10, "query": "best tents"})
        assert "Generate exactly 10 feature coverage queries" in out
        assert "best tents" in out

    def test_missing_binding(self):
        with pytest.raises(MissingBinding) as excinfo:
            render(TEMPLATES["query_generation"], {"n": 5})
        assert excinfo.value.name == "noun"

    def test_braces_in_output_examples_survive(self):
        out = render(TEMPLATES["hint_generation"], {"num_queries": 10, "query": "q"})
        assert '{"name": "Brand 1", "confidence": 95},' in out

    def test_annotation_batch_size_twice(self):
        out = render(TEMPLATES["relevance_annotation"], {"batch_size": 7, "input": "x"})
        assert out.count("**7**") == 2

    def test_every_placeholder_token_declared_in_body(self):
        for template in TEMPLATES.values():
            for name, token in template.placeholders.items():
                assert token in template.body, (template.name, name)

    def test_undeclared_token_rejected(self):
        with pytest.raises(ValueError):
            PromptTemplate("bad", "no tokens here", {"x": "<x>"})


class TestGoldenPrompts:
    # Template drift guard: rendered bytes for fixed bindings are frozen.
    BINDINGS = {
        "query_generation": {"n": 50, "noun": "balloons"},
        "relevance_annotation": {"batch_size": 3, "input": "1. query: q product: p"},
        "hint_generation": {"num_queries": 10, "query": "best metallic balloons"},
        "chunk_ranking": {
            "query": "best metallic balloons",
            "products": "1. Product one\n2. Product two",
        },
    }

    @pytest.mark.parametrize("name", sorted(BINDINGS))
    def test_rendered_prompt_matches_golden(self, name):
        rendered = render(TEMPLATES[name], self.BINDINGS[name])
        golden = (DATA / f"prompt_{name}.golden.txt").read_text(encoding="utf-8")
        assert rendered == golden
