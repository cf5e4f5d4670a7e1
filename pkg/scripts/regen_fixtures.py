#!/usr/bin/env python3
"""Regenerate the committed replay cache for the Sample/Barcode fixture.

Run after any change to the prompt templates or fingerprinting scheme:

    python scripts/regen_fixtures.py

Responses are fixed by hand here (identity refinement, accepted by the
judge); only the fingerprints are derived from the code.
"""

from __future__ import annotations

import json
from pathlib import Path

from relrae.gateway import ChatRequest, fingerprint
from relrae.judge import JudgeConfig, VERDICT_PHRASES, build_evaluation_prompt
from relrae.refinement import RefinementConfig, build_refinement_prompt
from relrae.rubrex import run_rubrex
from relrae.schema_model import parse_xsd

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

REFINEMENT_RESPONSES = {
    ("Sample", "Barcode"): '{"label": "hasBarcode"}',
}
JUDGE_RESPONSES = {
    ("Sample", "Barcode"): "Yes",
}


def main() -> None:
    refine_config = RefinementConfig()
    judge_config = JudgeConfig()
    doc = parse_xsd(FIXTURES / "sample_barcode.xsd")
    entries = []

    for rel in run_rubrex(doc):
        key = (rel.domain_name, rel.range_name)

        refine_prompt = build_refinement_prompt(rel, refine_config.variant,
                                                refine_config.example_set())
        refine_request = ChatRequest(
            model_id=refine_config.model,
            prompt=refine_prompt,
            temperature=refine_config.temperature,
            max_output_tokens=refine_config.max_output_tokens,
        )
        refined = json.loads(REFINEMENT_RESPONSES[key])["label"]
        entries.append({
            "fingerprint": fingerprint(refine_request),
            "model_id": refine_config.model,
            "response": REFINEMENT_RESPONSES[key],
        })

        judge_prompt = build_evaluation_prompt(rel, refined)
        judge_request = ChatRequest(
            model_id=judge_config.model,
            prompt=judge_prompt,
            temperature=judge_config.temperature,
            constrained_choices=VERDICT_PHRASES,
            max_output_tokens=judge_config.max_output_tokens,
        )
        entries.append({
            "fingerprint": fingerprint(judge_request),
            "model_id": judge_config.model,
            "response": JUDGE_RESPONSES[key],
        })

    target = FIXTURES / "replay_cache.jsonl"
    with target.open("w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(json.dumps(entry, ensure_ascii=False) + "\n")
    print(f"wrote {target} ({len(entries)} entries)")


if __name__ == "__main__":
    main()
