"""End-to-end orchestration: parse, label, refine, judge, emit.

Per-relationship gateway failures downgrade to warnings and keep the
rule-based label; a replay miss is fatal for the whole run because it means
the committed cache cannot reproduce the requested run.
"""

from __future__ import annotations

import dataclasses
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import ontology as onto
from .errors import GatewayError, InvalidIri, ReplayMiss
from .gateway import GatewayConfig, LlmGateway
from .judge import (
    AcceptancePolicy,
    JudgeConfig,
    JudgeRecord,
    LikertVerdict,
    apply_acceptance_policy,
    judge_label,
    judge_record_payload,
    warn_if_same_family,
)
from .refinement import (
    PromptVariant,
    RefinementConfig,
    eligible_for_refinement,
    generate_label,
    refine_label,
)
from .rubrex import (
    LabelledRelationship,
    Provenance,
    TABLE_RULES,
    relationship_records,
    rules_from_json,
    run_rubrex,
)
from .schema_model import SchemaDocument, parse_xsd, schema_records

logger = logging.getLogger(__name__)

METHODS = ("rubrex-only", "llm-only", "refined")


@dataclass
class PipelineConfig:
    input_xsd: str = ""
    output: str = "skeleton.ttl"
    base_iri: str = onto.DEFAULT_BASE_IRI
    method: str = "refined"
    format: str = "turtle"  # turtle | ntriples
    llm_mode: str = "mock"
    cache: str | None = None
    rules: str | None = None
    no_judge: bool = False
    refine_subclass: bool = False
    refine: RefinementConfig = field(default_factory=RefinementConfig)
    judge: JudgeConfig = field(default_factory=JudgeConfig)
    gateway: GatewayConfig = field(default_factory=GatewayConfig)
    dump_schema: str | None = None
    dump_relationships: str | None = None
    dump_verdicts: str | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.format not in ("turtle", "ntriples"):
            raise ValueError(f"format must be 'turtle' or 'ntriples', got {self.format!r}")

    def build_gateway(self) -> LlmGateway:
        config = dataclasses.replace(self.gateway, mode=self.llm_mode, cache_path=self.cache)
        return LlmGateway(config)

    def rule_table(self):
        return rules_from_json(self.rules) if self.rules else TABLE_RULES

    def to_dict(self) -> dict:
        """Resolved-config snapshot (API key deliberately excluded)."""
        return {
            "input_xsd": self.input_xsd,
            "output": self.output,
            "base_iri": self.base_iri,
            "method": self.method,
            "format": self.format,
            "llm_mode": self.llm_mode,
            "cache": self.cache,
            "rules": self.rules,
            "no_judge": self.no_judge,
            "refine_subclass": self.refine_subclass,
            "refine": {
                "model": self.refine.model,
                "temperature": self.refine.temperature,
                "variant": self.refine.variant.value,
                "examples": self.refine.examples,
                "parallelism": self.refine.parallelism,
                "domain_description": self.refine.domain_description,
                "max_output_tokens": self.refine.max_output_tokens,
            },
            "judge": {
                "model": self.judge.model,
                "temperature": self.judge.temperature,
                "accept_at_or_above": self.judge.accept_at_or_above.phrase,
                "parallelism": self.judge.parallelism,
                "domain_description": self.judge.domain_description,
                "max_output_tokens": self.judge.max_output_tokens,
            },
            "gateway": {
                "base_url": self.gateway.base_url,
                "chat_path": self.gateway.chat_path,
                "auth_header": self.gateway.auth_header,
                "auth_scheme": self.gateway.auth_scheme,
                "timeout": self.gateway.timeout,
                "max_in_flight": self.gateway.max_in_flight,
            },
            "dump_schema": self.dump_schema,
            "dump_relationships": self.dump_relationships,
            "dump_verdicts": self.dump_verdicts,
        }

    @staticmethod
    def from_dict(data: dict) -> "PipelineConfig":
        refine_data = dict(data.get("refine", {}))
        if "variant" in refine_data:
            refine_data["variant"] = PromptVariant(refine_data["variant"])
        judge_data = dict(data.get("judge", {}))
        if "accept_at_or_above" in judge_data:
            judge_data["accept_at_or_above"] = LikertVerdict.from_phrase(
                judge_data["accept_at_or_above"])
        gateway_data = dict(data.get("gateway", {}))
        known = {f.name for f in dataclasses.fields(PipelineConfig)}
        for key in data:
            if key not in known:
                logger.warning("unknown config key %r ignored", key)
        top = {k: v for k, v in data.items()
               if k in known and k not in ("refine", "judge", "gateway")}
        return PipelineConfig(
            **top,
            refine=RefinementConfig(**refine_data),
            judge=JudgeConfig(**judge_data),
            gateway=GatewayConfig(**gateway_data),
        )


@dataclass
class PipelineResult:
    document: SchemaDocument
    rubrex_relationships: list[LabelledRelationship]
    final_relationships: list[LabelledRelationship]
    judge_records: list[JudgeRecord]
    ontology: onto.SkeletonOntology
    output_path: str


def _map_ordered(fn, items, parallelism: int):
    """Apply fn preserving input order; bounded thread pool when asked for."""
    if parallelism <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(fn, items))


def label_relationships(config: PipelineConfig,
                        rubrex_rels: list[LabelledRelationship],
                        gateway: LlmGateway | None = None,
                        ) -> tuple[list[LabelledRelationship], list[JudgeRecord]]:
    """Turn rule-based relationships into final ones per the configured method."""
    if config.method == "rubrex-only":
        return list(rubrex_rels), []

    if gateway is None:
        gateway = config.build_gateway()

    if config.method == "llm-only":
        def generate_one(rel: LabelledRelationship) -> LabelledRelationship:
            if not eligible_for_refinement(rel, config.refine_subclass):
                return rel
            try:
                outcome = generate_label(rel, gateway, config.refine)
            except ReplayMiss:
                raise
            except GatewayError as exc:
                logger.warning("label generation failed for (%s, %s): %s; keeping %r",
                               rel.domain_name, rel.range_name, exc, rel.label)
                return rel
            return rel.with_label(outcome.returned_label, Provenance.refined())

        return _map_ordered(generate_one, rubrex_rels, config.refine.parallelism), []

    # refined: the full pipeline
    warn_if_same_family(config.refine.model, config.judge.model)
    policy = AcceptancePolicy(config.judge.accept_at_or_above)

    def refine_one(rel: LabelledRelationship):
        if not eligible_for_refinement(rel, config.refine_subclass):
            return rel, None
        try:
            outcome = refine_label(rel, gateway, config.refine)
        except ReplayMiss:
            raise
        except GatewayError as exc:
            logger.warning("refinement failed for (%s, %s): %s; keeping %r",
                           rel.domain_name, rel.range_name, exc, rel.label)
            return rel, None
        if config.no_judge:
            return rel.with_label(outcome.returned_label, Provenance.refined()), None
        try:
            record = judge_label(rel, outcome.returned_label, gateway, config.judge)
        except ReplayMiss:
            raise
        except GatewayError as exc:
            logger.warning("judging failed for (%s, %s): %s; keeping %r",
                           rel.domain_name, rel.range_name, exc, rel.label)
            return rel, None
        return apply_acceptance_policy(rel.label, outcome, record, policy), record

    parallelism = max(config.refine.parallelism, config.judge.parallelism)
    results = _map_ordered(refine_one, rubrex_rels, parallelism)
    finals = [rel for rel, _ in results]
    records = [record for _, record in results if record is not None]
    return finals, records


def emit_ontology(final_rels: list[LabelledRelationship],
                  policy: onto.IriPolicy) -> onto.SkeletonOntology:
    fragments = []
    for rel in final_rels:
        try:
            fragments.append(onto.relationship_to_fragment(rel, policy))
        except InvalidIri as exc:
            logger.warning("skipping fragment for (%s, %s): %s",
                           rel.domain_name, rel.range_name, exc)
    return onto.merge_fragments(fragments, policy)


def _write_jsonl(path: str, records: list[dict]) -> None:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with target.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def config_snapshot_path(output: str) -> Path:
    out = Path(output)
    return out.with_name(out.stem + ".config.json")


def run_pipeline(config: PipelineConfig) -> PipelineResult:
    """Execute the full run and write all requested artifacts.

    Fatal errors raise; the CLI maps them to exit codes.
    """
    doc = parse_xsd(config.input_xsd)
    rubrex_rels = run_rubrex(doc, config.rule_table())
    final_rels, records = label_relationships(config, rubrex_rels)

    policy = onto.IriPolicy(config.base_iri)
    skeleton = emit_ontology(final_rels, policy)

    out = Path(config.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    if config.format == "turtle":
        onto.serialize_turtle(skeleton, out)
    else:
        onto.serialize_ntriples(skeleton, out)

    if config.dump_schema:
        _write_jsonl(config.dump_schema, schema_records(doc))
    if config.dump_relationships:
        _write_jsonl(config.dump_relationships, relationship_records(final_rels))
    if config.dump_verdicts:
        _write_jsonl(config.dump_verdicts, [judge_record_payload(r) for r in records])

    snapshot = config_snapshot_path(config.output)
    snapshot.write_text(json.dumps(config.to_dict(), indent=2, ensure_ascii=False) + "\n",
                        encoding="utf-8")

    return PipelineResult(
        document=doc,
        rubrex_relationships=rubrex_rels,
        final_relationships=final_rels,
        judge_records=records,
        ontology=skeleton,
        output_path=str(out),
    )


def label_for_temperature(config: PipelineConfig, temperature: float,
                          ) -> list[LabelledRelationship]:
    """One labelling run at the given refinement temperature, nothing written."""
    doc = parse_xsd(config.input_xsd)
    rubrex_rels = run_rubrex(doc, config.rule_table())
    swept = dataclasses.replace(
        config, refine=dataclasses.replace(config.refine, temperature=temperature))
    final_rels, _ = label_relationships(swept, rubrex_rels)
    return final_rels
