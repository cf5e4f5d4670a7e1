"""Translate final labelled relationships into RDF and serialize them.

The serializer is deliberately hand-rolled: output bytes are part of the
contract (goldens, replay determinism), so prefixes, subjects, predicates,
and objects are all emitted in a fixed sort order.
"""

from __future__ import annotations

import re
import urllib.parse
from dataclasses import dataclass, field
from pathlib import Path

from .errors import InvalidIri
from .rubrex import LabelledRelationship, RelKind, upper_camel
from .schema_model import EntityKind

RDF_NS = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
RDFS_NS = "http://www.w3.org/2000/01/rdf-schema#"
OWL_NS = "http://www.w3.org/2002/07/owl#"
XSD_NS = "http://www.w3.org/2001/XMLSchema#"

RDF_TYPE = RDF_NS + "type"
RDFS_SUBCLASS_OF = RDFS_NS + "subClassOf"
RDFS_DOMAIN = RDFS_NS + "domain"
RDFS_RANGE = RDFS_NS + "range"
RDFS_LABEL = RDFS_NS + "label"
RDFS_DATATYPE = RDFS_NS + "Datatype"
OWL_CLASS = OWL_NS + "Class"
OWL_OBJECT_PROPERTY = OWL_NS + "ObjectProperty"
OWL_DATATYPE_PROPERTY = OWL_NS + "DatatypeProperty"

DEFAULT_BASE_IRI = "http://example.org/relrae#"

_SCHEME_RE = re.compile(r"^[A-Za-z][A-Za-z0-9+.\-]*://?")


@dataclass(frozen=True)
class Literal:
    value: str


Triple = tuple[str, str, "str | Literal"]


@dataclass(frozen=True)
class IriPolicy:
    """Entity names camel-case into class fragments; labels become property
    fragments as-is (IRI-unsafe characters percent-encoded). Identical names
    map to identical IRIs, deliberately merging duplicate definitions."""

    base_iri: str = DEFAULT_BASE_IRI

    def __post_init__(self):
        if not self.base_iri.endswith(("/", "#")):
            raise InvalidIri(f"base IRI {self.base_iri!r} must end with '/' or '#'")
        if not _SCHEME_RE.match(self.base_iri):
            raise InvalidIri(f"base IRI {self.base_iri!r} has no scheme")

    def class_iri(self, entity_name: str) -> str:
        fragment = upper_camel(entity_name)
        if not fragment:
            raise InvalidIri(f"entity name {entity_name!r} normalizes to an empty fragment")
        return self.base_iri + fragment

    def property_iri(self, label: str) -> str:
        fragment = urllib.parse.quote(label, safe="")
        if not fragment:
            raise InvalidIri("empty property label")
        return self.base_iri + fragment

    def datatype_iri(self, value_type: str | None) -> str:
        if value_type is None:
            return XSD_NS + "string"
        if value_type.startswith("xsd:"):
            return XSD_NS + value_type[len("xsd:"):]
        return self.class_iri(value_type)


@dataclass(frozen=True)
class SkeletonOntology:
    statements: frozenset[Triple]
    prefixes: tuple[tuple[str, str], ...]

    def __len__(self) -> int:
        return len(self.statements)


def _standard_prefixes(policy: IriPolicy) -> tuple[tuple[str, str], ...]:
    return (
        ("", policy.base_iri),
        ("owl", OWL_NS),
        ("rdf", RDF_NS),
        ("rdfs", RDFS_NS),
        ("xsd", XSD_NS),
    )


def relationship_to_fragment(rel: LabelledRelationship,
                             policy: IriPolicy = IriPolicy()) -> set[Triple]:
    """RDF triples for one relationship.

    Classes are declared only for complex-typed entities; datatype property
    ranges use the entity's value type, defaulting to xsd:string.
    """
    triples: set[Triple] = set()

    if rel.kind is RelKind.DATATYPE_DECLARATION:
        triples.add((policy.class_iri(rel.range.name), RDF_TYPE, RDFS_DATATYPE))
        return triples

    if rel.kind is RelKind.SUBCLASS_AXIOM:
        child = policy.class_iri(rel.domain.name)
        parent = policy.class_iri(rel.range.name)
        triples.add((child, RDF_TYPE, OWL_CLASS))
        triples.add((parent, RDF_TYPE, OWL_CLASS))
        triples.add((child, RDFS_SUBCLASS_OF, parent))
        return triples

    prop = policy.property_iri(rel.label)
    domain_iri = policy.class_iri(rel.domain.name)
    triples.add((prop, RDFS_DOMAIN, domain_iri))
    triples.add((prop, RDFS_LABEL, Literal(rel.label)))
    if rel.domain.kind is EntityKind.COMPLEX_TYPE:
        triples.add((domain_iri, RDF_TYPE, OWL_CLASS))

    if rel.kind is RelKind.OBJECT_PROPERTY:
        range_iri = policy.class_iri(rel.range.name)
        triples.add((prop, RDF_TYPE, OWL_OBJECT_PROPERTY))
        triples.add((prop, RDFS_RANGE, range_iri))
        if rel.range.kind is EntityKind.COMPLEX_TYPE:
            triples.add((range_iri, RDF_TYPE, OWL_CLASS))
    else:
        triples.add((prop, RDF_TYPE, OWL_DATATYPE_PROPERTY))
        triples.add((prop, RDFS_RANGE, policy.datatype_iri(rel.range.value_type)))
    return triples


def merge_fragments(fragments: list[set[Triple]],
                    policy: IriPolicy = IriPolicy()) -> SkeletonOntology:
    """Set union of all fragments: idempotent and order-independent."""
    merged: set[Triple] = set()
    for fragment in fragments:
        merged |= fragment
    return SkeletonOntology(statements=frozenset(merged),
                            prefixes=_standard_prefixes(policy))


def _escape_literal(value: str) -> str:
    return (value.replace("\\", "\\\\")
                 .replace('"', '\\"')
                 .replace("\n", "\\n")
                 .replace("\r", "\\r")
                 .replace("\t", "\\t"))


def _prefixed(iri: str, prefixes: tuple[tuple[str, str], ...]) -> str:
    best: tuple[str, str] | None = None
    for prefix, namespace in prefixes:
        if iri.startswith(namespace) and (best is None or len(namespace) > len(best[1])):
            best = (prefix, namespace)
    if best is None:
        return f"<{iri}>"
    local = iri[len(best[1]):]
    if not re.fullmatch(r"[A-Za-z0-9_.%\-]*", local) or local.startswith((".", "-")):
        return f"<{iri}>"
    return f"{best[0]}:{local}"


def _render_term(term: str | Literal, prefixes: tuple[tuple[str, str], ...]) -> str:
    if isinstance(term, Literal):
        return f'"{_escape_literal(term.value)}"'
    return _prefixed(term, prefixes)


def turtle_string(onto: SkeletonOntology) -> str:
    """Deterministic Turtle text: sorted prefixes, subjects, predicates."""
    lines = [f"@prefix {prefix}: <{ns}> ." for prefix, ns in sorted(onto.prefixes)]

    by_subject: dict[str, dict[str, list[str]]] = {}
    for subject, predicate, obj in onto.statements:
        s = _render_term(subject, onto.prefixes)
        p = "a" if predicate == RDF_TYPE else _render_term(predicate, onto.prefixes)
        o = _render_term(obj, onto.prefixes)
        by_subject.setdefault(s, {}).setdefault(p, []).append(o)

    def predicate_key(p: str) -> tuple[int, str]:
        return (0 if p == "a" else 1, p)

    for subject in sorted(by_subject):
        lines.append("")
        parts = []
        for predicate in sorted(by_subject[subject], key=predicate_key):
            objects = ", ".join(sorted(by_subject[subject][predicate]))
            parts.append(f"{predicate} {objects}")
        if len(parts) == 1:
            lines.append(f"{subject} {parts[0]} .")
        else:
            head, *rest = parts
            lines.append(f"{subject} {head} ;")
            lines.extend(f"    {part} {';' if i < len(rest) - 1 else '.'}"
                         for i, part in enumerate(rest))
    return "\n".join(lines) + "\n"


def ntriples_string(onto: SkeletonOntology) -> str:
    lines = []
    for subject, predicate, obj in onto.statements:
        o = f'"{_escape_literal(obj.value)}"' if isinstance(obj, Literal) else f"<{obj}>"
        lines.append(f"<{subject}> <{predicate}> {o} .")
    return "\n".join(sorted(lines)) + "\n" if lines else ""


def serialize_turtle(onto: SkeletonOntology, out: str | Path) -> int:
    """Write Turtle; same ontology always yields byte-identical files."""
    data = turtle_string(onto).encode("utf-8")
    Path(out).write_bytes(data)
    return len(data)


def serialize_ntriples(onto: SkeletonOntology, out: str | Path) -> int:
    data = ntriples_string(onto).encode("utf-8")
    Path(out).write_bytes(data)
    return len(data)
