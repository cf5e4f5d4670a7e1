"""Rule-based relationship extraction and labelling over a parsed schema graph.

Every containment edge becomes a candidate and every candidate receives
exactly one label assignment: the highest-priority matching pattern row, or
the default has-prefix label when no row matches. Standalone simple types and
attributes (referenced by no edge) are declared as datatypes so that every
extracted entity can land in the ontology.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

from .errors import EmptyRangeLabel
from .schema_model import EntityKind, ParticleKind, SchemaDocument, SchemaEntity

logger = logging.getLogger(__name__)


class LabelForm(str, Enum):
    HAS_PREFIX = "has-prefix"
    IS_PREFIX = "is-prefix"
    SUBCLASS_OF = "subclass-of"
    DATATYPE = "datatype"


class RelKind(str, Enum):
    OBJECT_PROPERTY = "ObjectProperty"
    DATATYPE_PROPERTY = "DatatypeProperty"
    SUBCLASS_AXIOM = "SubClassAxiom"
    DATATYPE_DECLARATION = "DatatypeDeclaration"


# Structural signatures a candidate can present. "choice" wins over "sequence"
# whenever a Choice particle appears anywhere on the path; All counts as
# Sequence. "bare" (an element edge with no particle) matches no row.
SHAPE_SEQUENCE = "sequence"
SHAPE_CHOICE = "choice"
SHAPE_ATTRIBUTE = "attribute"
SHAPE_DECLARATION = "declaration"
SHAPE_BARE = "bare"


@dataclass(frozen=True)
class PatternRule:
    id: int
    domain_kind: EntityKind
    shape: str
    range_kind: EntityKind | None
    restriction: str | None
    template: LabelForm


# The shipped rule table. Declaration rows name the declared entity in the
# domain column; the emitted statement carries it as the range.
TABLE_RULES: tuple[PatternRule, ...] = (
    PatternRule(1, EntityKind.COMPLEX_TYPE, SHAPE_SEQUENCE, EntityKind.COMPLEX_TYPE, None, LabelForm.HAS_PREFIX),
    PatternRule(2, EntityKind.COMPLEX_TYPE, SHAPE_SEQUENCE, EntityKind.SIMPLE_TYPE, None, LabelForm.HAS_PREFIX),
    PatternRule(3, EntityKind.COMPLEX_TYPE, SHAPE_SEQUENCE, EntityKind.SIMPLE_TYPE, "xsd:boolean", LabelForm.IS_PREFIX),
    PatternRule(4, EntityKind.COMPLEX_TYPE, SHAPE_CHOICE, EntityKind.COMPLEX_TYPE, None, LabelForm.SUBCLASS_OF),
    PatternRule(5, EntityKind.COMPLEX_TYPE, SHAPE_CHOICE, EntityKind.SIMPLE_TYPE, None, LabelForm.SUBCLASS_OF),
    PatternRule(6, EntityKind.COMPLEX_TYPE, SHAPE_ATTRIBUTE, EntityKind.ATTRIBUTE, None, LabelForm.HAS_PREFIX),
    PatternRule(7, EntityKind.COMPLEX_TYPE, SHAPE_ATTRIBUTE, EntityKind.ATTRIBUTE, "xsd:boolean", LabelForm.IS_PREFIX),
    PatternRule(9, EntityKind.SIMPLE_TYPE, SHAPE_DECLARATION, None, None, LabelForm.DATATYPE),
    PatternRule(10, EntityKind.ATTRIBUTE, SHAPE_DECLARATION, None, None, LabelForm.DATATYPE),
)


@dataclass(frozen=True)
class RelationshipCandidate:
    domain: SchemaEntity
    range: SchemaEntity
    intermediates: tuple[ParticleKind, ...]
    is_attribute_edge: bool

    @property
    def value_type(self) -> str | None:
        return self.range.value_type

    @property
    def shape(self) -> str:
        if self.is_attribute_edge:
            return SHAPE_ATTRIBUTE
        if ParticleKind.CHOICE in self.intermediates:
            return SHAPE_CHOICE
        if self.intermediates:
            return SHAPE_SEQUENCE
        return SHAPE_BARE


@dataclass(frozen=True)
class Provenance:
    kind: str  # rule | default | refined | fallback
    rule_id: int | None = None

    @staticmethod
    def rule(rule_id: int) -> "Provenance":
        return Provenance("rule", rule_id)

    @staticmethod
    def default() -> "Provenance":
        return Provenance("default")

    @staticmethod
    def refined() -> "Provenance":
        return Provenance("refined")

    @staticmethod
    def fallback(rule_id: int | None) -> "Provenance":
        return Provenance("fallback", rule_id)


@dataclass(frozen=True)
class LabelledRelationship:
    domain: SchemaEntity | None
    range: SchemaEntity
    label: str
    kind: RelKind
    provenance: Provenance
    domain_documentation: str | None = None
    range_documentation: str | None = None

    @property
    def domain_name(self) -> str:
        return self.domain.name if self.domain is not None else ""

    @property
    def range_name(self) -> str:
        return self.range.name

    def with_label(self, label: str, provenance: Provenance) -> "LabelledRelationship":
        return replace(self, label=label, provenance=provenance)


def upper_camel(text: str) -> str:
    """Camel-case a schema name: split on whitespace/hyphen/underscore,
    uppercase each token's first letter, strip non-alphanumerics."""
    parts = []
    for token in re.split(r"[\s_\-]+", text):
        cleaned = "".join(ch for ch in token if ch.isalnum())
        if cleaned:
            parts.append(cleaned[0].upper() + cleaned[1:])
    return "".join(parts)


def extract_relationships(doc: SchemaDocument) -> list[RelationshipCandidate]:
    """One candidate per containment edge, in document order of the edges."""
    candidates = []
    for edge in doc.containments:
        candidates.append(
            RelationshipCandidate(
                domain=doc.entity(edge.parent_id),
                range=doc.entity(edge.child_id),
                intermediates=edge.intermediates,
                is_attribute_edge=edge.is_attribute_edge,
            )
        )
    return candidates


def match_pattern(candidate: RelationshipCandidate,
                  rules: tuple[PatternRule, ...] = TABLE_RULES) -> PatternRule | None:
    """Highest-priority rule matching the candidate, or None for the default.

    Restricted rows beat their unrestricted twins; a Choice particle anywhere
    on the path selects the choice rows over the plain sequence rows.
    """
    shape = candidate.shape
    best: PatternRule | None = None
    for rule in rules:
        if rule.shape == SHAPE_DECLARATION or rule.shape != shape:
            continue
        if rule.domain_kind != candidate.domain.kind:
            continue
        if rule.range_kind is not None and rule.range_kind != candidate.range.kind:
            continue
        if rule.restriction is not None and candidate.value_type != rule.restriction:
            continue
        if best is None or (rule.restriction is not None and best.restriction is None):
            best = rule
    return best


def match_declaration(entity: SchemaEntity,
                      rules: tuple[PatternRule, ...] = TABLE_RULES) -> PatternRule | None:
    for rule in rules:
        if rule.shape == SHAPE_DECLARATION and rule.domain_kind == entity.kind:
            return rule
    return None


def render_label(rule: PatternRule | None, domain_label: str, range_label: str,
                 range_kind: EntityKind) -> tuple[str, RelKind]:
    """Label text and relationship kind for a rule (None = default has-prefix).

    Subclass templates reverse domain and range relative to the schema; the
    caller swaps the entities accordingly.
    """
    form = rule.template if rule is not None else LabelForm.HAS_PREFIX
    range_camel = upper_camel(range_label)
    if not range_camel:
        raise EmptyRangeLabel(f"range label {range_label!r} normalizes to nothing")

    if form is LabelForm.HAS_PREFIX:
        kind = (RelKind.OBJECT_PROPERTY if range_kind is EntityKind.COMPLEX_TYPE
                else RelKind.DATATYPE_PROPERTY)
        return "has" + range_camel, kind
    if form is LabelForm.IS_PREFIX:
        return "is" + range_camel, RelKind.DATATYPE_PROPERTY
    if form is LabelForm.SUBCLASS_OF:
        domain_camel = upper_camel(domain_label)
        if not domain_camel:
            raise EmptyRangeLabel(f"domain label {domain_label!r} normalizes to nothing")
        return f"{range_camel} subclassOf {domain_camel}", RelKind.SUBCLASS_AXIOM
    return "", RelKind.DATATYPE_DECLARATION


def run_rubrex(doc: SchemaDocument,
               rules: tuple[PatternRule, ...] = TABLE_RULES) -> list[LabelledRelationship]:
    """Stages 1&2: extract candidates, match patterns, render labels.

    A candidate that fails to render is skipped with a warning, never fatal.
    """
    relationships: list[LabelledRelationship] = []
    for candidate in extract_relationships(doc):
        rule = match_pattern(candidate, rules)
        try:
            label, kind = render_label(rule, candidate.domain.name, candidate.range.name,
                                       candidate.range.kind)
        except EmptyRangeLabel as exc:
            logger.warning("skipping candidate (%s, %s): %s",
                           candidate.domain.name, candidate.range.name, exc)
            continue
        if kind is RelKind.SUBCLASS_AXIOM:
            domain, rng = candidate.range, candidate.domain
        else:
            domain, rng = candidate.domain, candidate.range
        provenance = Provenance.rule(rule.id) if rule is not None else Provenance.default()
        relationships.append(
            LabelledRelationship(
                domain=domain,
                range=rng,
                label=label,
                kind=kind,
                provenance=provenance,
                domain_documentation=domain.documentation,
                range_documentation=rng.documentation,
            )
        )

    referenced = {e.parent_id for e in doc.containments} | {e.child_id for e in doc.containments}
    for entity in doc.entities:
        if entity.id in referenced:
            continue
        rule = match_declaration(entity, rules)
        if rule is None:
            continue
        relationships.append(
            LabelledRelationship(
                domain=None,
                range=entity,
                label="",
                kind=RelKind.DATATYPE_DECLARATION,
                provenance=Provenance.rule(rule.id),
                range_documentation=entity.documentation,
            )
        )
    return relationships


# --- rule table and relationship (de)serialization --------------------------


def rules_from_json(path: str | Path) -> tuple[PatternRule, ...]:
    """Load a rule-table override: a JSON array of rule objects."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    rules = tuple(
        PatternRule(
            id=int(item["id"]),
            domain_kind=EntityKind(item["domain"]),
            shape=item["shape"],
            range_kind=EntityKind(item["range"]) if item.get("range") else None,
            restriction=item.get("restriction"),
            template=LabelForm(item["template"]),
        )
        for item in raw
    )
    _validate_rules(rules)
    return rules


def rules_to_json(rules: tuple[PatternRule, ...]) -> list[dict]:
    return [
        {
            "id": r.id,
            "domain": r.domain_kind.value,
            "shape": r.shape,
            "range": r.range_kind.value if r.range_kind else None,
            "restriction": r.restriction,
            "template": r.template.value,
        }
        for r in rules
    ]


def _validate_rules(rules: tuple[PatternRule, ...]) -> None:
    seen: dict[tuple, set[bool]] = {}
    for rule in rules:
        signature = (rule.domain_kind, rule.shape, rule.range_kind)
        restricted = rule.restriction is not None
        bucket = seen.setdefault(signature, set())
        if restricted in bucket:
            raise ValueError(
                f"two {'restricted' if restricted else 'unrestricted'} rules share "
                f"the structural signature {signature}"
            )
        bucket.add(restricted)


def relationship_record(rel: LabelledRelationship) -> dict:
    """JSON-serializable record with label, kind, and provenance."""
    return {
        "domain": rel.domain.name if rel.domain is not None else None,
        "range": rel.range.name,
        "label": rel.label,
        "kind": rel.kind.value,
        "provenance": {"kind": rel.provenance.kind, "rule_id": rel.provenance.rule_id},
        "context": {
            "domain_documentation": rel.domain_documentation,
            "range_documentation": rel.range_documentation,
        },
    }


def relationship_records(rels: list[LabelledRelationship]) -> list[dict]:
    return [relationship_record(rel) for rel in rels]
