"""Label refinement: prompt construction and the accept-or-refine LLM call.

Prompt texts are frozen verbatim; only the domain phrase is configurable.
A response that cannot be parsed never loses the rule-based label: the
outcome falls back to the original label with ``changed=False``.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from enum import Enum

from .errors import MissingLabel
from .gateway import ChatRequest, LlmGateway
from .rubrex import LabelledRelationship, RelKind

logger = logging.getLogger(__name__)

DEFAULT_DOMAIN_DESCRIPTION = (
    "chemical formulation experiments being carried out by robots in a lab"
)

RESPONSE_FORMAT_INSTRUCTION = 'Respond with only a JSON object {"label": "..."}.'

NO_DOCUMENTATION = "no documentation"


class PromptVariant(str, Enum):
    BASE = "base"
    REFINEMENT = "refinement"
    REFINEMENT_WITH_DOCUMENTATION = "refinement-with-documentation"
    LLM_ONLY = "llm-only"


BASE_PROMPT = (
    "Given a relationship between two concepts, this relationship has a simple label "
    "describing it. Does this label accurately represent this relationship? If it "
    "doesn't, refine the label to more accurately represent the relationship. If it "
    "does, return the original label."
)

_REFINEMENT_PROMPT = (
    "You are an analytical chemist. Given a relationship between two concepts linked "
    "in an XML schema, this relationship has a simple label describing it and will be "
    "used in an ontology representing the domain of {domain_description}. Does this "
    "label accurately represent this relationship? If it doesn't, refine the label to "
    "more accurately represent the relationship. If it does return the original label."
)

_REFINEMENT_WITH_DOCUMENTATION_PROMPT = (
    "You are an analytical chemist. Given a relationship between two concepts linked "
    "in an XML schema and defined with the following documentation, this relationship "
    "has a simple label describing it and will be used in an ontology representing "
    "the domain of {domain_description}. Does this label accurately represent this "
    "relationship? If it doesn't, refine the label to more accurately represent the "
    "relationship. If it does return the original label."
)

_LLM_ONLY_PROMPT = (
    "You are an analytical chemist. Given a relationship between two concepts linked "
    "in an XML schema, this relationship will be used in an ontology representing the "
    "domain of {domain_description}. Generate a label to accurately represent this "
    "relationship."
)


def template_body(variant: PromptVariant,
                  domain_description: str = DEFAULT_DOMAIN_DESCRIPTION) -> str:
    if variant is PromptVariant.BASE:
        return BASE_PROMPT
    if variant is PromptVariant.REFINEMENT:
        return _REFINEMENT_PROMPT.format(domain_description=domain_description)
    if variant is PromptVariant.REFINEMENT_WITH_DOCUMENTATION:
        return _REFINEMENT_WITH_DOCUMENTATION_PROMPT.format(
            domain_description=domain_description)
    return _LLM_ONLY_PROMPT.format(domain_description=domain_description)


@dataclass(frozen=True)
class FewShotExample:
    domain_label: str
    range_label: str
    rubrex_label: str
    expected_response: str
    set: str  # generic | domain


GENERIC_EXAMPLES: tuple[FewShotExample, ...] = (
    FewShotExample("Apple", "Fruit", "subClassOf", "typeOf", "generic"),
    FewShotExample("Business", "Cashier", "hasCashier", "hasPosition", "generic"),
    FewShotExample("Fingers", "Hand", "subClassOf", "partOf", "generic"),
    FewShotExample("Keyboard", "Input Device", "subClassOf", "subClassOf", "generic"),
    FewShotExample("Father", "Son", "hasSon", "hasChild", "generic"),
)

DOMAIN_SPECIFIC_EXAMPLES: tuple[FewShotExample, ...] = (
    FewShotExample("Argon", "Nobel Gases", "hasNobelGases", "memberOf", "domain"),
    FewShotExample("Template", "template ID", "hasTemplateID", "hasID", "domain"),
    FewShotExample("Tag Set", "Tag", "hasTag", "hasMember", "domain"),
    FewShotExample("Author", "Role", "hasRole", "hasRole", "domain"),
    FewShotExample("Technique", "URI", "hasURI", "hasURI", "domain"),
)

EXAMPLE_SETS: dict[str, tuple[FewShotExample, ...]] = {
    "generic": GENERIC_EXAMPLES,
    "domain": DOMAIN_SPECIFIC_EXAMPLES,
    "none": (),
}


def _cell(text: str) -> str:
    """Escape a value for the one-line row format."""
    return (text.replace("\\", "\\\\")
                .replace('"', '\\"')
                .replace("\n", "\\n")
                .replace("|", "\\|"))


def render_example_row(domain: str, range_: str, label: str | None,
                       response: str | None) -> str:
    fields = [f"Domain: {_cell(domain)}", f"Range: {_cell(range_)}"]
    if label is not None:
        fields.append(f"Label: {_cell(label)}")
    if response is not None:
        fields.append(f"Response: {_cell(response)}")
    else:
        fields.append("Response:")
    return " | ".join(fields)


def build_refinement_prompt(rel: LabelledRelationship,
                            variant: PromptVariant = PromptVariant.REFINEMENT,
                            examples: tuple[FewShotExample, ...] = DOMAIN_SPECIFIC_EXAMPLES,
                            domain_description: str = DEFAULT_DOMAIN_DESCRIPTION) -> str:
    """Deterministic prompt: body, optional documentation block, format
    instruction, few-shot rows, then the query row with a blank response.

    The llm-only variant never presents labels: its rows carry domain and
    range only.
    """
    with_label = variant is not PromptVariant.LLM_ONLY
    if with_label and not rel.label:
        raise MissingLabel(f"relationship ({rel.domain_name}, {rel.range_name}) has no label")

    blocks = [template_body(variant, domain_description)]

    if variant is PromptVariant.REFINEMENT_WITH_DOCUMENTATION:
        domain_docs = rel.domain_documentation or NO_DOCUMENTATION
        range_docs = rel.range_documentation or NO_DOCUMENTATION
        blocks.append(f"{rel.domain_name}: {domain_docs}\n{rel.range_name}: {range_docs}")

    blocks.append(RESPONSE_FORMAT_INSTRUCTION)

    rows = [
        render_example_row(ex.domain_label, ex.range_label,
                           ex.rubrex_label if with_label else None,
                           ex.expected_response)
        for ex in examples
    ]
    rows.append(render_example_row(rel.domain_name, rel.range_name,
                                   rel.label if with_label else None, None))
    blocks.append("\n".join(rows))
    return "\n\n".join(blocks)


@dataclass(frozen=True)
class RefinementOutcome:
    original_label: str
    returned_label: str
    changed: bool
    raw_response: str
    model_id: str
    temperature: float


@dataclass
class RefinementConfig:
    model: str = "gpt-4o"
    temperature: float = 0.0
    variant: PromptVariant = PromptVariant.REFINEMENT
    examples: str = "domain"  # generic | domain | none
    parallelism: int = 1
    domain_description: str = DEFAULT_DOMAIN_DESCRIPTION
    max_output_tokens: int = 128

    def example_set(self) -> tuple[FewShotExample, ...]:
        return EXAMPLE_SETS[self.examples]


def parse_label_response(raw: str) -> str | None:
    """Extract the label from a response; None when nothing usable is there.

    Accepts the requested JSON object, or a bare label on the last non-empty
    line. Leftover braces mean a broken JSON attempt, which is unusable.
    """
    text = raw.strip()
    if not text:
        return None
    for candidate in (text, _first_json_block(text)):
        if candidate is None:
            continue
        try:
            obj = json.loads(candidate)
        except ValueError:
            continue
        if isinstance(obj, dict) and isinstance(obj.get("label"), str) and obj["label"].strip():
            return obj["label"].strip()
    lines = [line.strip() for line in text.splitlines() if line.strip()]
    if not lines:
        return None
    bare = lines[-1].strip().strip("`\"'").strip()
    if not bare or "{" in bare or "}" in bare:
        return None
    return bare


def _first_json_block(text: str) -> str | None:
    start = text.find("{")
    end = text.rfind("}")
    if start != -1 and end > start:
        return text[start:end + 1]
    return None


def _request_label(rel: LabelledRelationship, variant: PromptVariant,
                   gateway: LlmGateway, config: RefinementConfig) -> RefinementOutcome:
    prompt = build_refinement_prompt(rel, variant, config.example_set(),
                                     config.domain_description)
    raw = gateway.complete(ChatRequest(
        model_id=config.model,
        prompt=prompt,
        temperature=config.temperature,
        max_output_tokens=config.max_output_tokens,
    ))
    label = parse_label_response(raw)
    if label is None:
        logger.warning("unparseable label response for (%s, %s); keeping %r",
                       rel.domain_name, rel.range_name, rel.label)
        label = rel.label
    return RefinementOutcome(
        original_label=rel.label,
        returned_label=label,
        changed=label != rel.label,
        raw_response=raw,
        model_id=config.model,
        temperature=config.temperature,
    )


def refine_label(rel: LabelledRelationship, gateway: LlmGateway,
                 config: RefinementConfig) -> RefinementOutcome:
    """Ask the refinement model to accept or improve the label.

    Gateway transport errors propagate (the caller decides per-relationship
    handling); an unparseable or empty response keeps the original label.
    """
    return _request_label(rel, config.variant, gateway, config)


def generate_label(rel: LabelledRelationship, gateway: LlmGateway,
                   config: RefinementConfig) -> RefinementOutcome:
    """Direct label generation (no starting label shown to the model)."""
    return _request_label(rel, PromptVariant.LLM_ONLY, gateway, config)


def eligible_for_refinement(rel: LabelledRelationship, refine_subclass: bool = False) -> bool:
    """Predicate-style labels are refined; subclass axioms only on request;
    datatype declarations never (they carry no label)."""
    if rel.kind in (RelKind.OBJECT_PROPERTY, RelKind.DATATYPE_PROPERTY):
        return True
    if rel.kind is RelKind.SUBCLASS_AXIOM:
        return refine_subclass
    return False
