from __future__ import annotations

import itertools
import re

import pytest

from relrae.errors import InvalidIri
from relrae.ontology import (
    IriPolicy,
    Literal,
    OWL_CLASS,
    OWL_DATATYPE_PROPERTY,
    OWL_OBJECT_PROPERTY,
    RDF_TYPE,
    RDFS_DATATYPE,
    RDFS_DOMAIN,
    RDFS_LABEL,
    RDFS_RANGE,
    RDFS_SUBCLASS_OF,
    XSD_NS,
    merge_fragments,
    ntriples_string,
    relationship_to_fragment,
    serialize_turtle,
    turtle_string,
)
from relrae.rubrex import LabelledRelationship, Provenance, RelKind, run_rubrex
from relrae.schema_model import EntityKind, SchemaEntity, parse_xsd

from conftest import fixture_path

BASE = "http://example.org/relrae#"


def rel(domain, range_, label, kind, domain_kind=EntityKind.COMPLEX_TYPE,
        range_kind=EntityKind.COMPLEX_TYPE, range_value_type=None):
    return LabelledRelationship(
        domain=SchemaEntity(0, domain, domain_kind) if domain else None,
        range=SchemaEntity(1, range_, range_kind, range_value_type),
        label=label,
        kind=kind,
        provenance=Provenance.rule(1),
    )


class TestFragments:
    def test_object_property(self):
        triples = relationship_to_fragment(
            rel("Sample", "Barcode", "hasBarcode", RelKind.OBJECT_PROPERTY))
        assert triples == {
            (BASE + "Sample", RDF_TYPE, OWL_CLASS),
            (BASE + "Barcode", RDF_TYPE, OWL_CLASS),
            (BASE + "hasBarcode", RDF_TYPE, OWL_OBJECT_PROPERTY),
            (BASE + "hasBarcode", RDFS_DOMAIN, BASE + "Sample"),
            (BASE + "hasBarcode", RDFS_RANGE, BASE + "Barcode"),
            (BASE + "hasBarcode", RDFS_LABEL, Literal("hasBarcode")),
        }

    def test_datatype_property_range_uses_value_type(self):
        triples = relationship_to_fragment(
            rel("Sample", "id", "hasId", RelKind.DATATYPE_PROPERTY,
                range_kind=EntityKind.ATTRIBUTE, range_value_type="xsd:ID"))
        assert (BASE + "hasId", RDFS_RANGE, XSD_NS + "ID") in triples
        # attribute entity is not declared a class
        assert all(not (s == BASE + "Id" and p == RDF_TYPE) for s, p, _ in triples)

    def test_datatype_property_defaults_to_string(self):
        triples = relationship_to_fragment(
            rel("Sample", "note", "hasNote", RelKind.DATATYPE_PROPERTY,
                range_kind=EntityKind.ELEMENT))
        assert (BASE + "hasNote", RDFS_RANGE, XSD_NS + "string") in triples

    def test_subclass_axiom(self):
        triples = relationship_to_fragment(
            rel("Method", "Technique", "Method subclassOf Technique", RelKind.SUBCLASS_AXIOM))
        assert triples == {
            (BASE + "Method", RDF_TYPE, OWL_CLASS),
            (BASE + "Technique", RDF_TYPE, OWL_CLASS),
            (BASE + "Method", RDFS_SUBCLASS_OF, BASE + "Technique"),
        }

    def test_datatype_declaration_single_triple(self):
        triples = relationship_to_fragment(
            rel(None, "pHValue", "", RelKind.DATATYPE_DECLARATION,
                range_kind=EntityKind.SIMPLE_TYPE))
        assert triples == {(BASE + "PHValue", RDF_TYPE, RDFS_DATATYPE)}

    def test_unsafe_label_is_percent_encoded(self):
        triples = relationship_to_fragment(
            rel("A", "B", "has label", RelKind.OBJECT_PROPERTY))
        subjects = {s for s, _, _ in triples}
        assert BASE + "has%20label" in subjects


class TestIriPolicy:
    def test_base_must_end_properly(self):
        with pytest.raises(InvalidIri):
            IriPolicy("http://example.org/relrae")

    def test_base_needs_scheme(self):
        with pytest.raises(InvalidIri):
            IriPolicy("relrae#")

    def test_empty_class_fragment(self):
        with pytest.raises(InvalidIri):
            IriPolicy().class_iri("---")

    def test_duplicate_names_share_an_iri(self):
        policy = IriPolicy()
        assert policy.class_iri("Sample") == policy.class_iri("Sample")


class TestMerge:
    def test_union_without_duplicates(self):
        a = relationship_to_fragment(rel("Sample", "Barcode", "hasBarcode",
                                         RelKind.OBJECT_PROPERTY))
        b = relationship_to_fragment(rel("Sample", "Tag", "hasTag",
                                         RelKind.OBJECT_PROPERTY))
        merged = merge_fragments([a, b])
        assert len(merged.statements) == len(a | b)

    def test_idempotent(self):
        a = relationship_to_fragment(rel("Sample", "Barcode", "hasBarcode",
                                         RelKind.OBJECT_PROPERTY))
        assert merge_fragments([a, a]).statements == merge_fragments([a]).statements

    def test_order_independent(self):
        fragments = [
            relationship_to_fragment(rel("Sample", name, f"has{name}",
                                         RelKind.OBJECT_PROPERTY))
            for name in ("Barcode", "Tag", "Author")
        ]
        ontologies = {merge_fragments(list(perm)).statements
                      for perm in itertools.permutations(fragments)}
        assert len(ontologies) == 1

    def test_empty_merge_keeps_prefixes(self):
        onto = merge_fragments([])
        assert onto.statements == frozenset()
        assert dict(onto.prefixes)["owl"].startswith("http://www.w3.org/2002")


class TestSerialization:
    def test_golden_turtle(self):
        doc = parse_xsd(fixture_path("sample_barcode.xsd"))
        fragments = [relationship_to_fragment(r) for r in run_rubrex(doc)]
        onto = merge_fragments(fragments)
        assert turtle_string(onto) == fixture_path("sample_barcode_rubrex.ttl").read_text()

    def test_golden_turtle_all_patterns(self):
        doc = parse_xsd(fixture_path("all_patterns.xsd"))
        fragments = [relationship_to_fragment(r) for r in run_rubrex(doc)]
        onto = merge_fragments(fragments)
        assert turtle_string(onto) == fixture_path("all_patterns_rubrex.ttl").read_text()

    def test_serialize_twice_identical(self, tmp_path):
        doc = parse_xsd(fixture_path("all_patterns.xsd"))
        fragments = [relationship_to_fragment(r) for r in run_rubrex(doc)]
        onto = merge_fragments(fragments)
        first, second = tmp_path / "a.ttl", tmp_path / "b.ttl"
        serialize_turtle(onto, first)
        serialize_turtle(onto, second)
        assert first.read_bytes() == second.read_bytes()

    def test_empty_ontology_is_prefixes_only(self):
        text = turtle_string(merge_fragments([]))
        lines = [line for line in text.splitlines() if line]
        assert all(line.startswith("@prefix") for line in lines)
        assert len(lines) == 5

    def test_ntriples_sorted_full_iris(self):
        onto = merge_fragments([relationship_to_fragment(
            rel("Sample", "Barcode", "hasBarcode", RelKind.OBJECT_PROPERTY))])
        text = ntriples_string(onto)
        lines = text.splitlines()
        assert lines == sorted(lines)
        assert all(line.endswith(" .") for line in lines)
        assert f"<{BASE}hasBarcode> <{RDFS_LABEL}> \"hasBarcode\" ." in lines

    def test_literal_escaping(self):
        onto = merge_fragments([{("http://x/s", RDFS_LABEL, Literal('say "hi"\nnow'))}])
        assert '"say \\"hi\\"\\nnow"' in turtle_string(onto)


class TestNtriplesGrammar:
    # one statement per line: IRIs in angle brackets or a quoted literal object
    LINE = re.compile(
        r'^<[^<>"{}|^`\\\s]+> <[^<>"{}|^`\\\s]+> '
        r'(<[^<>"{}|^`\\\s]+>|"(?:[^"\\\n\r]|\\.)*") \.$'
    )

    def test_every_line_matches_the_production(self):
        doc = parse_xsd(fixture_path("all_patterns.xsd"))
        onto = merge_fragments([relationship_to_fragment(r) for r in run_rubrex(doc)])
        for line in ntriples_string(onto).splitlines():
            assert self.LINE.match(line), line


class TestInvariants:
    def _ontology(self):
        doc = parse_xsd(fixture_path("all_patterns.xsd"))
        rels = run_rubrex(doc)
        return rels, merge_fragments([relationship_to_fragment(r) for r in rels])

    def test_triple_count_bound(self):
        rels, onto = self._ontology()
        doc = parse_xsd(fixture_path("all_patterns.xsd"))
        assert len(onto.statements) <= len(rels) * 6 + len(doc.entities) * 2

    def test_declaration_closure(self):
        _, onto = self._ontology()
        declared = {s for s, p, o in onto.statements if p == RDF_TYPE}
        for s, p, o in onto.statements:
            if p in (RDFS_DOMAIN, RDFS_RANGE):
                assert s in declared
            if p == RDFS_SUBCLASS_OF:
                assert s in declared and o in declared
            if p == RDFS_DOMAIN:
                assert o in declared
