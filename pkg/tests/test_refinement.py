from __future__ import annotations

import pytest

from relrae.errors import MissingLabel, ReplayMiss
from relrae.gateway import ChatRequest, GatewayConfig, LlmGateway, ReplayCache, fingerprint
from relrae.refinement import (
    DOMAIN_SPECIFIC_EXAMPLES,
    GENERIC_EXAMPLES,
    PromptVariant,
    RefinementConfig,
    build_refinement_prompt,
    eligible_for_refinement,
    parse_label_response,
    refine_label,
    render_example_row,
)
from relrae.rubrex import LabelledRelationship, Provenance, RelKind
from relrae.schema_model import EntityKind, SchemaEntity

from conftest import fixture_text


def make_rel(domain="Sample", range_="Barcode", label="hasBarcode",
             kind=RelKind.OBJECT_PROPERTY, domain_docs=None, range_docs=None):
    return LabelledRelationship(
        domain=SchemaEntity(0, domain, EntityKind.COMPLEX_TYPE),
        range=SchemaEntity(1, range_, EntityKind.COMPLEX_TYPE),
        label=label,
        kind=kind,
        provenance=Provenance.rule(1),
        domain_documentation=domain_docs,
        range_documentation=range_docs,
    )


def replay_gateway(tmp_path, prompt_to_response: dict[str, str],
                   model="gpt-4o", temperature=0.0):
    cache_file = tmp_path / "cache.jsonl"
    cache = ReplayCache(cache_file)
    for prompt, response in prompt_to_response.items():
        req = ChatRequest(model_id=model, prompt=prompt, temperature=temperature,
                          max_output_tokens=128)
        cache.add(fingerprint(req), model, response)
    return LlmGateway(GatewayConfig(mode="replay", cache_path=str(cache_file)))


class TestPromptGoldens:
    def test_refinement_prompt(self):
        prompt = build_refinement_prompt(make_rel(), PromptVariant.REFINEMENT,
                                         DOMAIN_SPECIFIC_EXAMPLES)
        assert prompt == fixture_text("prompt_refinement.txt")

    def test_base_prompt_without_examples(self):
        prompt = build_refinement_prompt(make_rel(), PromptVariant.BASE, ())
        assert prompt == fixture_text("prompt_base.txt")

    def test_documentation_variant(self):
        rel = make_rel(domain_docs="A measured specimen.", range_docs=None)
        prompt = build_refinement_prompt(rel, PromptVariant.REFINEMENT_WITH_DOCUMENTATION,
                                         DOMAIN_SPECIFIC_EXAMPLES)
        assert prompt == fixture_text("prompt_refinement_docs.txt")

    def test_llm_only_variant(self):
        prompt = build_refinement_prompt(make_rel(), PromptVariant.LLM_ONLY,
                                         DOMAIN_SPECIFIC_EXAMPLES)
        assert prompt == fixture_text("prompt_llm_only.txt")

    def test_prompt_starts_and_ends_as_contracted(self):
        prompt = build_refinement_prompt(make_rel(), PromptVariant.REFINEMENT,
                                         DOMAIN_SPECIFIC_EXAMPLES)
        assert prompt.startswith("You are an analytical chemist.")
        assert prompt.endswith("Domain: Sample | Range: Barcode | Label: hasBarcode | Response:")

    def test_prompt_determinism(self):
        a = build_refinement_prompt(make_rel(), PromptVariant.REFINEMENT,
                                    DOMAIN_SPECIFIC_EXAMPLES)
        b = build_refinement_prompt(make_rel(), PromptVariant.REFINEMENT,
                                    DOMAIN_SPECIFIC_EXAMPLES)
        assert a == b


class TestFewShotFidelity:
    def test_generic_table(self):
        rendered = "".join(
            render_example_row(e.domain_label, e.range_label, e.rubrex_label,
                               e.expected_response) + "\n"
            for e in GENERIC_EXAMPLES
        )
        assert rendered == fixture_text("fewshot_generic.txt")

    def test_domain_table(self):
        rendered = "".join(
            render_example_row(e.domain_label, e.range_label, e.rubrex_label,
                               e.expected_response) + "\n"
            for e in DOMAIN_SPECIFIC_EXAMPLES
        )
        assert rendered == fixture_text("fewshot_domain.txt")

    def test_exactly_five_rows_each(self):
        assert len(GENERIC_EXAMPLES) == 5
        assert len(DOMAIN_SPECIFIC_EXAMPLES) == 5


class TestPromptConstruction:
    def test_missing_label_raises(self):
        rel = make_rel(label="")
        with pytest.raises(MissingLabel):
            build_refinement_prompt(rel, PromptVariant.REFINEMENT, ())

    def test_docs_absent_on_both_sides(self):
        rel = make_rel()
        prompt = build_refinement_prompt(rel, PromptVariant.REFINEMENT_WITH_DOCUMENTATION, ())
        assert "Sample: no documentation\nBarcode: no documentation" in prompt

    def test_row_cells_escape_pipes_and_quotes(self):
        row = render_example_row('Say "hi"', "a|b", "has\nLabel", None)
        assert row == 'Domain: Say \\"hi\\" | Range: a\\|b | Label: has\\nLabel | Response:'

    def test_configurable_domain_description(self):
        prompt = build_refinement_prompt(make_rel(), PromptVariant.REFINEMENT, (),
                                         domain_description="beer brewing")
        assert "the domain of beer brewing." in prompt


class TestResponseParsing:
    @pytest.mark.parametrize("raw, expected", [
        ('{"label": "hasID"}', "hasID"),
        ('  {"label": "hasID"}  ', "hasID"),
        ('Sure! {"label": "hasID"} hope that helps', "hasID"),
        ("hasID", "hasID"),
        ("some chatter\nhasID", "hasID"),
        ('"hasID"', "hasID"),
        ("`hasID`", "hasID"),
    ])
    def test_parseable(self, raw, expected):
        assert parse_label_response(raw) == expected

    @pytest.mark.parametrize("raw", [
        "",
        "   \n  ",
        '{"label": ',
        '{"label": 7}',
        '{"other": "x"}',
    ])
    def test_unusable(self, raw):
        assert parse_label_response(raw) is None


class TestRefineLabel:
    def test_identity_response_is_unchanged(self, tmp_path):
        rel = make_rel()
        prompt = build_refinement_prompt(rel, PromptVariant.REFINEMENT,
                                         DOMAIN_SPECIFIC_EXAMPLES)
        gw = replay_gateway(tmp_path, {prompt: '{"label": "hasBarcode"}'})
        outcome = refine_label(rel, gw, RefinementConfig())
        assert outcome.returned_label == "hasBarcode"
        assert outcome.changed is False

    def test_changed_label(self, tmp_path):
        rel = make_rel(domain="Template", range_="templateID", label="hasTemplateID")
        prompt = build_refinement_prompt(rel, PromptVariant.REFINEMENT,
                                         DOMAIN_SPECIFIC_EXAMPLES)
        gw = replay_gateway(tmp_path, {prompt: '{"label": "hasID"}'})
        outcome = refine_label(rel, gw, RefinementConfig())
        assert outcome.changed is True
        assert outcome.returned_label == "hasID"
        assert outcome.original_label == "hasTemplateID"

    def test_malformed_response_keeps_original(self, tmp_path, caplog):
        rel = make_rel()
        prompt = build_refinement_prompt(rel, PromptVariant.REFINEMENT,
                                         DOMAIN_SPECIFIC_EXAMPLES)
        gw = replay_gateway(tmp_path, {prompt: '{"label": '})
        with caplog.at_level("WARNING"):
            outcome = refine_label(rel, gw, RefinementConfig())
        assert outcome.returned_label == "hasBarcode"
        assert outcome.changed is False
        assert any("unparseable" in m for m in caplog.messages)

    def test_replay_miss_propagates(self, tmp_path):
        gw = replay_gateway(tmp_path, {})
        with pytest.raises(ReplayMiss):
            refine_label(make_rel(), gw, RefinementConfig())


class TestEligibility:
    def test_predicates_are_eligible(self):
        assert eligible_for_refinement(make_rel())
        assert eligible_for_refinement(make_rel(kind=RelKind.DATATYPE_PROPERTY))

    def test_subclass_needs_flag(self):
        rel = make_rel(kind=RelKind.SUBCLASS_AXIOM, label="Method subclassOf Technique")
        assert not eligible_for_refinement(rel)
        assert eligible_for_refinement(rel, refine_subclass=True)

    def test_datatype_declarations_never(self):
        rel = make_rel(kind=RelKind.DATATYPE_DECLARATION, label="")
        assert not eligible_for_refinement(rel)
        assert not eligible_for_refinement(rel, refine_subclass=True)
