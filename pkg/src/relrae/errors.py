"""Exception hierarchy shared across the pipeline."""

from __future__ import annotations


class RelraeError(Exception):
    """Base class for all errors raised by this package."""


# --- schema parsing ---------------------------------------------------------


class SchemaError(RelraeError):
    pass


class MalformedXml(SchemaError):
    pass


class NotASchema(SchemaError):
    pass


class UnresolvedTypeReference(SchemaError):
    """A type or ref attribute names no declared type.

    Reported (never raised during parsing): the referencing entity is kept,
    the containment edge into it is dropped.
    """

    def __init__(self, entity_name: str, reference: str):
        super().__init__(f"entity {entity_name!r} references undeclared type {reference!r}")
        self.entity_name = entity_name
        self.reference = reference


class UnknownEntity(RelraeError):
    def __init__(self, entity_id: int):
        super().__init__(f"no entity with ordinal {entity_id}")
        self.entity_id = entity_id


# --- labelling --------------------------------------------------------------


class EmptyRangeLabel(RelraeError):
    pass


class MissingLabel(RelraeError):
    pass


# --- LLM gateway ------------------------------------------------------------


class GatewayError(RelraeError):
    pass


class ReplayMiss(GatewayError):
    def __init__(self, fingerprint: str):
        super().__init__(f"no replay entry for fingerprint {fingerprint}")
        self.fingerprint = fingerprint


class ProviderError(GatewayError):
    def __init__(self, status: int | None, detail: str):
        super().__init__(f"provider error (status={status}): {detail}")
        self.status = status
        self.detail = detail


class GatewayTimeout(GatewayError):
    pass


class ConstraintViolated(GatewayError):
    def __init__(self, response: str, choices: tuple[str, ...]):
        super().__init__(f"response {response!r} is not one of {choices}")
        self.response = response
        self.choices = choices


# --- ontology emission ------------------------------------------------------


class InvalidIri(RelraeError):
    pass


# --- evaluation harness -----------------------------------------------------


class DimensionMismatch(RelraeError):
    pass


class ZeroVector(RelraeError):
    pass


class MissingPrecomputedVector(RelraeError):
    def __init__(self, label: str):
        super().__init__(f"no precomputed vector for label {label!r}")
        self.label = label


class MissingHumanRating(RelraeError):
    def __init__(self, key: object):
        super().__init__(f"no human rating for {key!r}")
        self.key = key


class EmptyInput(RelraeError):
    pass


class OutOfRange(RelraeError):
    pass
