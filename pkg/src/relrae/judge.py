"""Label evaluation by a second model on a five-point Likert scale.

The evaluator is constrained to exactly five verdicts. Accepted labels keep
the refined text; rejected ones fall back to the rule-based label, so the
final label is always one of the two.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import IntEnum

from .errors import ConstraintViolated, MissingLabel, OutOfRange
from .gateway import ChatRequest, LlmGateway
from .refinement import RefinementOutcome, render_example_row
from .rubrex import LabelledRelationship, Provenance

logger = logging.getLogger(__name__)

JUDGE_DOMAIN_DESCRIPTION = (
    "chemical formulation experiments carried out by robots in laboratories"
)


class LikertVerdict(IntEnum):
    NO = 1
    UNLIKELY = 2
    POSSIBLE = 3
    LIKELY = 4
    YES = 5

    @property
    def phrase(self) -> str:
        return _PHRASES[self.value - 1]

    @classmethod
    def from_phrase(cls, phrase: str) -> "LikertVerdict":
        try:
            return cls(_PHRASES.index(phrase) + 1)
        except ValueError:
            raise ValueError(f"{phrase!r} is not a Likert verdict") from None


_PHRASES = ("No", "Unlikely", "Possible", "Likely", "Yes")
VERDICT_PHRASES: tuple[str, ...] = _PHRASES


_EVALUATION_PROMPT = (
    "Is the label {label} an appropriate label to describe the relationship between "
    "domain: {domain} and range: {range}? These concepts are derived from an XML "
    "schema describing the domain of {domain_description}. The relationship linking "
    "these concepts will be used in an ontology representing the same domain."
)

# Worked evaluations shown to the judge, one verdict per scale point.
JUDGE_EXAMPLES: tuple[tuple[str, str, str, str], ...] = (
    ("Sample", "Barcode", "hasBarcode", "Yes"),
    ("derived", "xsd:boolean", "isDerivedSample", "No"),
    ("Method", "name", "hasOptionalMethodName", "Likely"),
    ("Method", "Author", "wasPerfomedBy", "Possible"),
    ("id", "xsd:ID", "UniqueIdentifier", "Unlikely"),
)


def build_evaluation_prompt(rel: LabelledRelationship, label: str,
                            few_shot: tuple[tuple[str, str, str, str], ...] = JUDGE_EXAMPLES,
                            domain_description: str = JUDGE_DOMAIN_DESCRIPTION) -> str:
    """The evaluation question with the label and concepts substituted,
    followed by the worked examples and the query row."""
    if not label:
        raise MissingLabel(f"relationship ({rel.domain_name}, {rel.range_name}) has no label")
    body = _EVALUATION_PROMPT.format(
        label=label,
        domain=rel.domain_name,
        range=rel.range_name,
        domain_description=domain_description,
    )
    rows = [render_example_row(d, r, lbl, resp) for d, r, lbl, resp in few_shot]
    rows.append(render_example_row(rel.domain_name, rel.range_name, label, None))
    return body + "\n\n" + "\n".join(rows)


@dataclass(frozen=True)
class JudgeRecord:
    relationship: LabelledRelationship
    judged_label: str
    verdict: LikertVerdict
    raw_response: str
    model_id: str
    temperature: float


@dataclass
class JudgeConfig:
    model: str = "gemini-2.0-flash"
    temperature: float = 0.3
    accept_at_or_above: LikertVerdict = LikertVerdict.LIKELY
    parallelism: int = 1
    domain_description: str = JUDGE_DOMAIN_DESCRIPTION
    max_output_tokens: int = 8


def judge_label(rel: LabelledRelationship, label: str, gateway: LlmGateway,
                config: JudgeConfig) -> JudgeRecord:
    """Constrained completion over the five verdicts.

    A constraint-violating backend gets one retry, then the middle verdict is
    recorded with a warning.
    """
    prompt = build_evaluation_prompt(rel, label, domain_description=config.domain_description)
    request = ChatRequest(
        model_id=config.model,
        prompt=prompt,
        temperature=config.temperature,
        constrained_choices=VERDICT_PHRASES,
        max_output_tokens=config.max_output_tokens,
    )
    raw: str
    try:
        raw = gateway.complete_constrained(request)
        verdict = LikertVerdict.from_phrase(raw)
    except ConstraintViolated:
        try:
            raw = gateway.complete_constrained(request)
            verdict = LikertVerdict.from_phrase(raw)
        except ConstraintViolated as exc:
            logger.warning("judge output %r violates the verdict constraint twice; "
                           "recording Possible for (%s, %s)",
                           exc.response, rel.domain_name, rel.range_name)
            raw = exc.response
            verdict = LikertVerdict.POSSIBLE
    return JudgeRecord(
        relationship=rel,
        judged_label=label,
        verdict=verdict,
        raw_response=raw,
        model_id=config.model,
        temperature=config.temperature,
    )


def verdict_from_fraction(score: float) -> LikertVerdict:
    """Map a confidence fraction to the scale via half-open lower-inclusive
    intervals with a closed top: [0,.2) No ... [.8,1] Yes."""
    if not 0.0 <= score <= 1.0:
        raise OutOfRange(f"score {score} outside [0, 1]")
    if score < 0.2:
        return LikertVerdict.NO
    if score < 0.4:
        return LikertVerdict.UNLIKELY
    if score < 0.6:
        return LikertVerdict.POSSIBLE
    if score < 0.8:
        return LikertVerdict.LIKELY
    return LikertVerdict.YES


@dataclass(frozen=True)
class AcceptancePolicy:
    accept_at_or_above: LikertVerdict = LikertVerdict.LIKELY


def apply_acceptance_policy(rubrex_label: str, outcome: RefinementOutcome,
                            record: JudgeRecord,
                            policy: AcceptancePolicy = AcceptancePolicy()) -> LabelledRelationship:
    """Accepted verdicts keep the refined label; anything below the threshold
    restores the rule-based label with fallback provenance."""
    if record.judged_label != outcome.returned_label:
        raise ValueError(
            f"judged label {record.judged_label!r} does not match the refinement "
            f"outcome {outcome.returned_label!r}"
        )
    rel = record.relationship
    if record.verdict >= policy.accept_at_or_above:
        return rel.with_label(outcome.returned_label, Provenance.refined())
    original = rel.provenance
    rule_id = original.rule_id if original.kind == "rule" else None
    return rel.with_label(rubrex_label, Provenance.fallback(rule_id))


def model_family(model_id: str) -> str:
    """Leading name segment, e.g. 'gpt' or 'gemini'."""
    head = model_id.strip().lower()
    for sep in ("/", ":"):
        if sep in head:
            head = head.split(sep)[-1]
    for sep in ("-", "_", " "):
        head = head.split(sep)[0]
    return head


def warn_if_same_family(refine_model: str, judge_model: str) -> bool:
    """True (and a warning) when both stages share a model family."""
    same = model_family(refine_model) == model_family(judge_model)
    if same:
        logger.warning("judge model %r shares a family with refinement model %r; "
                       "an independent family reduces evaluation bias",
                       judge_model, refine_model)
    return same


def judge_record_payload(record: JudgeRecord) -> dict:
    """JSON-serializable verdict record."""
    return {
        "domain": record.relationship.domain_name or None,
        "range": record.relationship.range_name,
        "judged_label": record.judged_label,
        "verdict": record.verdict.phrase,
        "verdict_value": int(record.verdict),
        "raw_response": record.raw_response,
        "model_id": record.model_id,
        "temperature": record.temperature,
    }
