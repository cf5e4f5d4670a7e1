"""relrae: XML schema to skeleton-ontology pipeline with LLM label refinement."""

from .errors import RelraeError
from .gateway import ChatRequest, GatewayConfig, LlmGateway, ReplayCache, fingerprint
from .judge import (
    AcceptancePolicy,
    JudgeConfig,
    JudgeRecord,
    LikertVerdict,
    apply_acceptance_policy,
    build_evaluation_prompt,
    judge_label,
    verdict_from_fraction,
)
from .ontology import (
    IriPolicy,
    SkeletonOntology,
    merge_fragments,
    relationship_to_fragment,
    serialize_turtle,
)
from .pipeline import PipelineConfig, PipelineResult, run_pipeline
from .refinement import (
    FewShotExample,
    PromptVariant,
    RefinementConfig,
    RefinementOutcome,
    build_refinement_prompt,
    refine_label,
)
from .rubrex import (
    LabelledRelationship,
    PatternRule,
    Provenance,
    RelationshipCandidate,
    RelKind,
    TABLE_RULES,
    extract_relationships,
    match_pattern,
    render_label,
    run_rubrex,
    upper_camel,
)
from .schema_model import (
    ContainmentEdge,
    EntityKind,
    ParticleKind,
    SchemaDocument,
    SchemaEntity,
    entity_documentation,
    parse_xsd,
)
from .evaluation import (
    AgreementReport,
    HashStubEmbeddingProvider,
    PrecomputedEmbeddingProvider,
    ReferenceSet,
    SimilarityReport,
    cosine_similarity,
    embed,
    likert_agreement,
    score_labels,
    temperature_sweep,
)

__version__ = "0.1.0"

__all__ = [
    "AcceptancePolicy",
    "AgreementReport",
    "ChatRequest",
    "ContainmentEdge",
    "EntityKind",
    "FewShotExample",
    "GatewayConfig",
    "HashStubEmbeddingProvider",
    "IriPolicy",
    "JudgeConfig",
    "JudgeRecord",
    "LabelledRelationship",
    "LikertVerdict",
    "LlmGateway",
    "ParticleKind",
    "PatternRule",
    "PipelineConfig",
    "PipelineResult",
    "PrecomputedEmbeddingProvider",
    "PromptVariant",
    "Provenance",
    "ReferenceSet",
    "RefinementConfig",
    "RefinementOutcome",
    "RelKind",
    "RelationshipCandidate",
    "RelraeError",
    "ReplayCache",
    "SchemaDocument",
    "SchemaEntity",
    "SimilarityReport",
    "SkeletonOntology",
    "TABLE_RULES",
    "apply_acceptance_policy",
    "build_evaluation_prompt",
    "build_refinement_prompt",
    "cosine_similarity",
    "embed",
    "entity_documentation",
    "extract_relationships",
    "fingerprint",
    "judge_label",
    "likert_agreement",
    "match_pattern",
    "merge_fragments",
    "parse_xsd",
    "refine_label",
    "relationship_to_fragment",
    "render_label",
    "run_pipeline",
    "run_rubrex",
    "score_labels",
    "serialize_turtle",
    "temperature_sweep",
    "upper_camel",
    "verdict_from_fraction",
]
