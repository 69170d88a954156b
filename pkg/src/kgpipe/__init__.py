"""Knowledge-graph construction from text.

Open triplets are extracted with an LLM, every relation gets a natural-language
definition, and a similarity-search-plus-MCQ canonicalization step rewrites the
triplets against a fixed target schema or a schema grown from scratch. An
optional refinement loop feeds previous rounds' entities and retrieved schema
relations back into extraction.
"""

from .canonicalize import (
    CanonConfig,
    CanonicalSchemaState,
    CanonMode,
    build_target_index,
    canonicalize_document,
    canonicalize_triplet,
)
from .define import define_relations
from .embedding import (
    HttpEmbeddingBackend,
    ReplayEmbeddingBackend,
    RetrievalInstruction,
    embed,
)
from .evaluate import (
    EvalReport,
    MatchCriterion,
    aggregate,
    evaluate_documents,
    redundancy_score,
    schema_stats,
    score_document,
)
from .gateway import (
    ChatMessage,
    ChatRequest,
    GatewayError,
    HttpChatBackend,
    HttpConfig,
    ReplayChatBackend,
    ReplayMissError,
    TransportError,
    complete,
)
from .index import (
    SimilarityHit,
    VectorIndex,
    cosine,
    info_nce_loss,
    recall_at_k,
    retrieve_relations,
    top_k,
)
from .model import (
    ActionKind,
    CanonicalizationAction,
    Document,
    ExtractionRecord,
    RelationDefinition,
    Schema,
    Triplet,
    dedupe_triplets,
    normalize_relation,
)
from .oie import (
    OieConfig,
    extract_entities,
    extract_refined,
    extract_triplets,
    extract_with_definitions,
)
from .pipeline import Backends, Hint, PipelineConfig, build_hint, run_pipeline, run_single_pass

__version__ = "0.1.0"

__all__ = [
    "ActionKind",
    "Backends",
    "CanonConfig",
    "CanonMode",
    "CanonicalSchemaState",
    "CanonicalizationAction",
    "ChatMessage",
    "ChatRequest",
    "Document",
    "EvalReport",
    "ExtractionRecord",
    "GatewayError",
    "Hint",
    "HttpChatBackend",
    "HttpConfig",
    "HttpEmbeddingBackend",
    "MatchCriterion",
    "OieConfig",
    "PipelineConfig",
    "RelationDefinition",
    "ReplayChatBackend",
    "ReplayEmbeddingBackend",
    "ReplayMissError",
    "RetrievalInstruction",
    "Schema",
    "SimilarityHit",
    "TransportError",
    "Triplet",
    "VectorIndex",
    "aggregate",
    "build_hint",
    "build_target_index",
    "canonicalize_document",
    "canonicalize_triplet",
    "complete",
    "cosine",
    "dedupe_triplets",
    "define_relations",
    "embed",
    "evaluate_documents",
    "extract_entities",
    "extract_refined",
    "extract_triplets",
    "extract_with_definitions",
    "info_nce_loss",
    "normalize_relation",
    "recall_at_k",
    "redundancy_score",
    "retrieve_relations",
    "run_pipeline",
    "run_single_pass",
    "schema_stats",
    "score_document",
    "top_k",
]
