from __future__ import annotations

import json

from relrae.cli import main
from relrae.gateway import ChatRequest, ReplayCache, fingerprint
from relrae.judge import JudgeConfig, VERDICT_PHRASES, build_evaluation_prompt
from relrae.refinement import RefinementConfig, build_refinement_prompt
from relrae.rubrex import run_rubrex
from relrae.schema_model import parse_xsd

from conftest import fixture_path


def build_cache(tmp_path, refine_response='{"label": "hasAttachedBarcode"}',
                judge_response="Likely"):
    """Cache for the Sample/Barcode fixture with a changed refined label."""
    doc = parse_xsd(fixture_path("sample_barcode.xsd"))
    (rel,) = run_rubrex(doc)
    refine_config = RefinementConfig()
    judge_config = JudgeConfig()
    cache_file = tmp_path / "cache.jsonl"
    cache = ReplayCache(cache_file)

    refine_req = ChatRequest(refine_config.model, build_refinement_prompt(rel),
                             refine_config.temperature,
                             max_output_tokens=refine_config.max_output_tokens)
    cache.add(fingerprint(refine_req), refine_config.model, refine_response)

    refined = json.loads(refine_response)["label"]
    judge_req = ChatRequest(judge_config.model, build_evaluation_prompt(rel, refined),
                            judge_config.temperature,
                            constrained_choices=VERDICT_PHRASES,
                            max_output_tokens=judge_config.max_output_tokens)
    cache.add(fingerprint(judge_req), judge_config.model, judge_response)
    return cache_file


def run_refined(tmp_path, cache_file, *extra):
    out = tmp_path / "rels.jsonl"
    args = [
        "enrich",
        "--input", str(fixture_path("sample_barcode.xsd")),
        "--output", str(tmp_path / "out.ttl"),
        "--method", "refined",
        "--llm-mode", "replay",
        "--cache", str(cache_file),
        "--dump-relationships", str(out),
        *extra,
    ]
    assert main(args) == 0
    return json.loads(out.read_text().splitlines()[0])


class TestAcceptanceThresholdFlag:
    def test_likely_accepted_at_default_threshold(self, tmp_path):
        cache = build_cache(tmp_path, judge_response="Likely")
        record = run_refined(tmp_path, cache)
        assert record["label"] == "hasAttachedBarcode"
        assert record["provenance"]["kind"] == "refined"

    def test_likely_rejected_when_threshold_is_yes(self, tmp_path):
        cache = build_cache(tmp_path, judge_response="Likely")
        record = run_refined(tmp_path, cache, "--accept-at-or-above", "Yes")
        assert record["label"] == "hasBarcode"
        assert record["provenance"] == {"kind": "fallback", "rule_id": 1}

    def test_possible_rejected_at_default_threshold(self, tmp_path):
        cache = build_cache(tmp_path, judge_response="Possible")
        record = run_refined(tmp_path, cache)
        assert record["label"] == "hasBarcode"
        assert record["provenance"]["kind"] == "fallback"


class TestNoJudgeFlag:
    def test_refinement_accepted_without_judging(self, tmp_path):
        # cache holds only the refinement entry; judging would be a replay miss
        doc = parse_xsd(fixture_path("sample_barcode.xsd"))
        (rel,) = run_rubrex(doc)
        config = RefinementConfig()
        cache_file = tmp_path / "cache.jsonl"
        cache = ReplayCache(cache_file)
        request = ChatRequest(config.model, build_refinement_prompt(rel),
                              config.temperature, max_output_tokens=config.max_output_tokens)
        cache.add(fingerprint(request), config.model, '{"label": "hasAttachedBarcode"}')

        record = run_refined(tmp_path, cache_file, "--no-judge")
        assert record["label"] == "hasAttachedBarcode"
        assert record["provenance"]["kind"] == "refined"


class TestRefineSubclassFlag:
    def test_subclass_labels_untouched_by_default(self, tmp_path):
        out = tmp_path / "rels.jsonl"
        assert main(["enrich",
                     "--input", str(fixture_path("all_patterns.xsd")),
                     "--output", str(tmp_path / "out.ttl"),
                     "--method", "refined", "--llm-mode", "mock",
                     "--dump-relationships", str(out)]) == 0
        records = [json.loads(line) for line in out.read_text().splitlines()]
        subclass = [r for r in records if r["kind"] == "SubClassAxiom"]
        assert subclass and all("subclassOf" in r["label"] for r in subclass)

    def test_subclass_labels_refinable_with_flag(self, tmp_path):
        out = tmp_path / "rels.jsonl"
        assert main(["enrich",
                     "--input", str(fixture_path("all_patterns.xsd")),
                     "--output", str(tmp_path / "out.ttl"),
                     "--method", "refined", "--llm-mode", "mock",
                     "--refine-subclass",
                     "--dump-relationships", str(out)]) == 0
        records = [json.loads(line) for line in out.read_text().splitlines()]
        subclass = [r for r in records if r["kind"] == "SubClassAxiom"]
        assert any(r["provenance"]["kind"] in ("refined", "fallback") for r in subclass)
