"""Parse an XSD file into a typed in-memory schema graph.

The parser keeps one entity per named declaration, in document order, and one
containment edge per textual parent/child declaration. Anonymous inline types
merge into the enclosing element or attribute, which keeps the textual name
available for labelling. Recursive type references therefore never unroll:
the edge list is linear in the number of declarations.
"""

from __future__ import annotations

import logging
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import MalformedXml, NotASchema, UnknownEntity, UnresolvedTypeReference

logger = logging.getLogger(__name__)

XSD_NS = "http://www.w3.org/2001/XMLSchema"

# Constructs outside the supported subset; skipped with a warning, never an error.
_IGNORED_LOCALS = {
    "import",
    "include",
    "redefine",
    "group",
    "attributeGroup",
    "any",
    "anyAttribute",
    "key",
    "keyref",
    "unique",
    "notation",
    "field",
    "selector",
}


class EntityKind(str, Enum):
    COMPLEX_TYPE = "ComplexType"
    SIMPLE_TYPE = "SimpleType"
    ATTRIBUTE = "Attribute"
    ELEMENT = "Element"


class ParticleKind(str, Enum):
    SEQUENCE = "Sequence"
    CHOICE = "Choice"
    ALL = "All"


_PARTICLE_BY_LOCAL = {
    "sequence": ParticleKind.SEQUENCE,
    "choice": ParticleKind.CHOICE,
    "all": ParticleKind.ALL,
}


@dataclass(frozen=True)
class SchemaEntity:
    """A named node extracted from the XSD."""

    id: int
    name: str
    kind: EntityKind
    value_type: str | None = None
    documentation: str | None = None


@dataclass(frozen=True)
class ContainmentEdge:
    parent_id: int
    child_id: int
    intermediates: tuple[ParticleKind, ...] = ()
    is_attribute_edge: bool = False


@dataclass(frozen=True)
class SchemaDocument:
    source_path: str
    target_namespace: str | None
    entities: tuple[SchemaEntity, ...]
    containments: tuple[ContainmentEdge, ...]

    def entity(self, entity_id: int) -> SchemaEntity:
        if 0 <= entity_id < len(self.entities):
            return self.entities[entity_id]
        raise UnknownEntity(entity_id)


def entity_documentation(doc: SchemaDocument, entity_id: int) -> str | None:
    """All annotation text attached to the entity, newline-joined, or None."""
    return doc.entity(entity_id).documentation


def parse_xsd(path: str | Path) -> SchemaDocument:
    """Parse a W3C XML Schema file into entities and containment edges.

    Raises MalformedXml for unparseable input and NotASchema when the root is
    not an XSD schema element. Unresolvable type/ref references are logged and
    the affected containment edge is dropped; parsing continues.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such schema file: {path}")
    root, ns_bindings = _read_tree(path)
    if _split_tag(root.tag) != (XSD_NS, "schema"):
        raise NotASchema(f"root element of {path} is {root.tag!r}, not an XSD schema")

    builder = _Builder(ns_bindings, root.get("targetNamespace"))
    builder.walk_schema(root)
    entities, edges = builder.finish()
    return SchemaDocument(
        source_path=str(path),
        target_namespace=root.get("targetNamespace"),
        entities=entities,
        containments=edges,
    )


def _read_tree(path: Path) -> tuple[ET.Element, dict[str, str]]:
    bindings: dict[str, str] = {}
    root: ET.Element | None = None
    try:
        for event, payload in ET.iterparse(str(path), events=("start-ns", "start")):
            if event == "start-ns":
                prefix, uri = payload
                if prefix in bindings and bindings[prefix] != uri:
                    logger.warning("prefix %r rebound from %r to %r; keeping first binding",
                                   prefix, bindings[prefix], uri)
                else:
                    bindings[prefix] = uri
            elif root is None:
                root = payload
    except ET.ParseError as exc:
        raise MalformedXml(f"{path}: {exc}") from exc
    except OSError as exc:
        raise MalformedXml(f"{path}: {exc}") from exc
    if root is None:
        raise MalformedXml(f"{path}: empty document")
    return root, bindings


def _split_tag(tag: str) -> tuple[str | None, str]:
    if tag.startswith("{"):
        uri, _, local = tag[1:].partition("}")
        return uri, local
    return None, tag


def _first_child(node: ET.Element, local: str) -> ET.Element | None:
    for child in node:
        if _split_tag(child.tag) == (XSD_NS, local):
            return child
    return None


@dataclass
class _EntityDraft:
    name: str
    kind: EntityKind
    value_type: str | None = None
    doc_parts: list[str] = field(default_factory=list)
    # unresolved "type" QName, checked in the resolution phase
    type_ref: str | None = None


@dataclass
class _EdgeDraft:
    parent: int
    child: int
    intermediates: tuple[ParticleKind, ...]
    is_attribute_edge: bool


class _Builder:
    def __init__(self, ns_bindings: dict[str, str], target_namespace: str | None):
        self.ns = ns_bindings
        self.target_namespace = target_namespace
        self.drafts: list[_EntityDraft] = []
        self.edges: list[_EdgeDraft] = []
        # first declaration wins for name lookup; duplicates stay distinct entities
        self.named_types: dict[str, int] = {}
        self.global_elements: dict[str, int] = {}
        self.global_attributes: dict[str, int] = {}
        # ordinal of a named simpleType -> its restriction base QName (raw)
        self.simple_bases: dict[int, str | None] = {}
        # by-name element/attribute refs, resolved after the walk
        self._pending_refs: list[tuple[str, str]] = []

    # --- walking -------------------------------------------------------

    def walk_schema(self, root: ET.Element) -> None:
        for child in root:
            uri, local = _split_tag(child.tag)
            if uri != XSD_NS:
                continue
            if local == "element":
                self._walk_element(child, parent=None, particles=())
            elif local == "attribute":
                self._walk_attribute(child, parent=None)
            elif local == "complexType":
                self._walk_named_complex_type(child)
            elif local == "simpleType":
                self._walk_named_simple_type(child)
            elif local == "annotation":
                continue
            elif local in _IGNORED_LOCALS:
                logger.warning("ignoring unsupported schema construct <%s>", local)
            else:
                logger.warning("ignoring unrecognized schema construct <%s>", local)

    def _new_entity(self, name: str, kind: EntityKind) -> int:
        ordinal = len(self.drafts)
        self.drafts.append(_EntityDraft(name=name, kind=kind))
        return ordinal

    def _walk_named_complex_type(self, node: ET.Element) -> None:
        name = node.get("name")
        if not name:
            logger.warning("skipping anonymous complexType at top level")
            return
        ordinal = self._new_entity(name, EntityKind.COMPLEX_TYPE)
        self.named_types.setdefault(name, ordinal)
        self._collect_annotation(node, ordinal)
        self._walk_complex_body(node, ordinal)

    def _walk_named_simple_type(self, node: ET.Element) -> None:
        name = node.get("name")
        if not name:
            logger.warning("skipping anonymous simpleType at top level")
            return
        ordinal = self._new_entity(name, EntityKind.SIMPLE_TYPE)
        self.named_types.setdefault(name, ordinal)
        self._collect_annotation(node, ordinal)
        self.simple_bases[ordinal] = self._simple_type_base(node)

    def _walk_element(self, node: ET.Element, parent: int | None,
                      particles: tuple[ParticleKind, ...]) -> None:
        ref = node.get("ref")
        if ref is not None:
            if parent is not None:
                self._add_ref_edge(parent, "element", ref, particles, False)
            return

        name = node.get("name")
        if not name:
            logger.warning("skipping element without name or ref")
            return
        if node.get("substitutionGroup"):
            logger.warning("ignoring substitutionGroup on element %r", name)
        if node.get("abstract") in ("true", "1"):
            logger.warning("ignoring abstract flag on element %r", name)

        inline_complex = _first_child(node, "complexType")
        inline_simple = _first_child(node, "simpleType")
        type_ref = node.get("type")

        if inline_complex is not None:
            # anonymous type takes the element's name
            ordinal = self._new_entity(name, EntityKind.COMPLEX_TYPE)
            self._collect_annotation(node, ordinal)
            self._collect_annotation(inline_complex, ordinal)
            if type_ref:
                logger.warning("element %r has both a type reference and an inline type; "
                               "using the inline type", name)
            self._add_edge(parent, ordinal, particles, False)
            self._walk_complex_body(inline_complex, ordinal)
        elif inline_simple is not None:
            ordinal = self._new_entity(name, EntityKind.SIMPLE_TYPE)
            self._collect_annotation(node, ordinal)
            self._collect_annotation(inline_simple, ordinal)
            self.simple_bases[ordinal] = self._simple_type_base(inline_simple)
            self._add_edge(parent, ordinal, particles, False)
        else:
            # kind settled in the resolution phase (Element when untyped)
            ordinal = self._new_entity(name, EntityKind.ELEMENT)
            self._collect_annotation(node, ordinal)
            self.drafts[ordinal].type_ref = type_ref
            self._add_edge(parent, ordinal, particles, False)

        if parent is None:
            self.global_elements.setdefault(name, ordinal)

    def _walk_attribute(self, node: ET.Element, parent: int | None) -> None:
        ref = node.get("ref")
        if ref is not None:
            if parent is not None:
                self._add_ref_edge(parent, "attribute", ref, (), True)
            return

        name = node.get("name")
        if not name:
            logger.warning("skipping attribute without name or ref")
            return
        ordinal = self._new_entity(name, EntityKind.ATTRIBUTE)
        self._collect_annotation(node, ordinal)
        inline_simple = _first_child(node, "simpleType")
        if inline_simple is not None:
            self._collect_annotation(inline_simple, ordinal)
            self.drafts[ordinal].type_ref = self._simple_type_base(inline_simple)
        else:
            self.drafts[ordinal].type_ref = node.get("type")
        self._add_edge(parent, ordinal, (), True)
        if parent is None:
            self.global_attributes.setdefault(name, ordinal)

    def _walk_complex_body(self, node: ET.Element, owner: int) -> None:
        for child in node:
            uri, local = _split_tag(child.tag)
            if uri != XSD_NS:
                continue
            if local in _PARTICLE_BY_LOCAL:
                self._walk_particle(child, owner, (_PARTICLE_BY_LOCAL[local],))
            elif local == "attribute":
                self._walk_attribute(child, parent=owner)
            elif local in ("complexContent", "simpleContent"):
                # derivation base is not mapped; particles/attributes still walked
                logger.warning("walking through <%s> without mapping its base type", local)
                for grand in child:
                    guri, glocal = _split_tag(grand.tag)
                    if guri != XSD_NS or glocal not in ("extension", "restriction"):
                        continue
                    for item in grand:
                        iuri, ilocal = _split_tag(item.tag)
                        if iuri != XSD_NS:
                            continue
                        if ilocal in _PARTICLE_BY_LOCAL:
                            self._walk_particle(item, owner, (_PARTICLE_BY_LOCAL[ilocal],))
                        elif ilocal == "attribute":
                            self._walk_attribute(item, parent=owner)
                        elif ilocal in _IGNORED_LOCALS:
                            logger.warning("ignoring unsupported construct <%s>", ilocal)
            elif local == "annotation":
                continue
            elif local in _IGNORED_LOCALS:
                logger.warning("ignoring unsupported construct <%s> in complexType", local)

    def _walk_particle(self, node: ET.Element, owner: int,
                       particles: tuple[ParticleKind, ...]) -> None:
        for child in node:
            uri, local = _split_tag(child.tag)
            if uri != XSD_NS:
                continue
            if local == "element":
                self._walk_element(child, parent=owner, particles=particles)
            elif local in _PARTICLE_BY_LOCAL:
                self._walk_particle(child, owner, particles + (_PARTICLE_BY_LOCAL[local],))
            elif local == "annotation":
                continue
            elif local in _IGNORED_LOCALS:
                logger.warning("ignoring unsupported construct <%s> in particle", local)

    def _add_edge(self, parent: int | None, child: int,
                  particles: tuple[ParticleKind, ...], is_attribute: bool) -> None:
        if parent is not None:
            self.edges.append(_EdgeDraft(parent, child, particles, is_attribute))

    def _add_ref_edge(self, parent: int, kind: str, ref: str,
                      particles: tuple[ParticleKind, ...], is_attribute: bool) -> None:
        # negative child marks an index into _pending_refs, resolved in finish()
        self._pending_refs.append((kind, ref))
        self.edges.append(_EdgeDraft(parent, -len(self._pending_refs), particles, is_attribute))

    def _collect_annotation(self, node: ET.Element, ordinal: int) -> None:
        for ann in node:
            uri, local = _split_tag(ann.tag)
            if uri != XSD_NS or local != "annotation":
                continue
            for doc in ann:
                duri, dlocal = _split_tag(doc.tag)
                if duri != XSD_NS or dlocal != "documentation":
                    continue
                text = "".join(doc.itertext()).strip()
                if text:
                    self.drafts[ordinal].doc_parts.append(text)

    def _simple_type_base(self, node: ET.Element) -> str | None:
        restriction = _first_child(node, "restriction")
        if restriction is not None:
            base = restriction.get("base")
            if base is not None:
                return base
            inline = _first_child(restriction, "simpleType")
            if inline is not None:
                return self._simple_type_base(inline)
            return None
        union = _first_child(node, "union")
        if union is not None:
            logger.warning("union simpleType; recording member types %r only",
                           union.get("memberTypes"))
            return None
        if _first_child(node, "list") is not None:
            logger.warning("list simpleType; item type not mapped to a value type")
            return None
        return None

    # --- resolution ------------------------------------------------------

    def finish(self) -> tuple[tuple[SchemaEntity, ...], tuple[ContainmentEdge, ...]]:
        drop_children: set[int] = set()
        for ordinal, draft in enumerate(self.drafts):
            if draft.kind is EntityKind.ELEMENT and draft.type_ref is not None:
                if not self._resolve_element_type(draft):
                    drop_children.add(ordinal)
            elif draft.kind is EntityKind.ATTRIBUTE and draft.type_ref is not None:
                if not self._resolve_attribute_type(draft):
                    drop_children.add(ordinal)
            elif draft.kind is EntityKind.SIMPLE_TYPE and draft.value_type is None:
                draft.value_type = self._resolve_simple_base(ordinal, set())

        entities = tuple(
            SchemaEntity(
                id=i,
                name=d.name,
                kind=d.kind,
                value_type=d.value_type,
                documentation="\n".join(d.doc_parts) if d.doc_parts else None,
            )
            for i, d in enumerate(self.drafts)
        )

        edges: list[ContainmentEdge] = []
        for edge in self.edges:
            child = edge.child
            if child < 0:
                kind, ref = self._pending_refs[-child - 1]
                local = self._reference_local_name(ref)
                table = self.global_elements if kind == "element" else self.global_attributes
                target = table.get(local) if local is not None else None
                if target is None:
                    logger.warning("%s", UnresolvedTypeReference(self.drafts[edge.parent].name, ref))
                    continue
                child = target
            if child in drop_children:
                continue
            edges.append(ContainmentEdge(edge.parent, child, edge.intermediates,
                                         edge.is_attribute_edge))
        return entities, tuple(edges)

    def _resolve_element_type(self, draft: _EntityDraft) -> bool:
        builtin = self._builtin_name(draft.type_ref)
        if builtin is not None:
            draft.kind = EntityKind.SIMPLE_TYPE
            draft.value_type = builtin
            return True
        local = self._reference_local_name(draft.type_ref)
        target = self.named_types.get(local) if local is not None else None
        if target is None:
            logger.warning("%s", UnresolvedTypeReference(draft.name, draft.type_ref or ""))
            return False
        target_draft = self.drafts[target]
        if target_draft.kind is EntityKind.COMPLEX_TYPE:
            draft.kind = EntityKind.COMPLEX_TYPE
        else:
            draft.kind = EntityKind.SIMPLE_TYPE
            draft.value_type = self._resolve_simple_base(target, set())
        return True

    def _resolve_attribute_type(self, draft: _EntityDraft) -> bool:
        builtin = self._builtin_name(draft.type_ref)
        if builtin is not None:
            draft.value_type = builtin
            return True
        local = self._reference_local_name(draft.type_ref)
        target = self.named_types.get(local) if local is not None else None
        if target is None:
            logger.warning("%s", UnresolvedTypeReference(draft.name, draft.type_ref or ""))
            return False
        if self.drafts[target].kind is EntityKind.COMPLEX_TYPE:
            logger.warning("attribute %r references complexType %r; value type left unset",
                           draft.name, self.drafts[target].name)
            return True
        draft.value_type = self._resolve_simple_base(target, set())
        return True

    def _resolve_simple_base(self, ordinal: int, seen: set[int]) -> str | None:
        if ordinal in seen:
            logger.warning("cyclic simpleType derivation at %r", self.drafts[ordinal].name)
            return None
        seen.add(ordinal)
        base = self.simple_bases.get(ordinal)
        if base is None:
            return None
        builtin = self._builtin_name(base)
        if builtin is not None:
            return builtin
        local = self._reference_local_name(base)
        target = self.named_types.get(local) if local is not None else None
        if target is None or self.drafts[target].kind is not EntityKind.SIMPLE_TYPE:
            return None
        return self._resolve_simple_base(target, seen)

    def _builtin_name(self, qname: str | None) -> str | None:
        """Canonical `xsd:<local>` when the QName is bound to the XSD namespace."""
        if not qname:
            return None
        prefix, _, local = qname.rpartition(":")
        if self.ns.get(prefix) == XSD_NS:
            return f"xsd:{local}"
        return None

    def _reference_local_name(self, qname: str | None) -> str | None:
        """Local name for a reference into this document, None for foreign ones."""
        if not qname:
            return None
        prefix, _, local = qname.rpartition(":")
        if not prefix:
            return local
        uri = self.ns.get(prefix)
        if uri is None:
            logger.warning("unbound namespace prefix in reference %r; trying local lookup", qname)
            return local
        if uri == XSD_NS:
            return None
        if self.target_namespace is not None and uri != self.target_namespace:
            logger.warning("reference %r points outside the target namespace; ignored", qname)
            return None
        return local


def schema_records(doc: SchemaDocument) -> list[dict]:
    """JSON-serializable records: one per entity, then one per edge."""
    records: list[dict] = []
    for entity in doc.entities:
        records.append({
            "record": "entity",
            "id": entity.id,
            "name": entity.name,
            "kind": entity.kind.value,
            "value_type": entity.value_type,
            "documentation": entity.documentation,
        })
    for edge in doc.containments:
        records.append({
            "record": "edge",
            "parent_id": edge.parent_id,
            "child_id": edge.child_id,
            "intermediates": [p.value for p in edge.intermediates],
            "is_attribute_edge": edge.is_attribute_edge,
        })
    return records
