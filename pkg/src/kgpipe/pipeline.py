"""End-to-end orchestration: base extraction pass plus iterative refinement.

Each document flows through extract, define, and canonicalize; refinement
iterations repeat the flow with a hint assembled from the previous round's
output, LLM entity extraction, and schema retrieval.
"""

from __future__ import annotations

import dataclasses
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

from .canonicalize import (
    CanonConfig,
    CanonicalSchemaState,
    CanonMode,
    build_target_index,
    canonicalize_document,
)
from .define import define_relations
from .embedding import EmbeddingBackend
from .gateway import ChatBackend, TransportError
from .index import retrieve_relations
from .model import Document, ExtractionRecord, Schema, Triplet
from .oie import (
    OieConfig,
    extract_entities,
    extract_refined,
    extract_triplets,
    extract_with_definitions,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Hint:
    """Refinement context: candidate entities and (name, definition) relations.

    Both lists are deduplicated with first occurrence winning, so
    previous-round items stay ahead of newly discovered ones.
    """

    candidate_entities: tuple[str, ...] = ()
    candidate_relations: tuple[tuple[str, str | None], ...] = ()


@dataclass(frozen=True)
class Backends:
    chat: ChatBackend
    embedder: EmbeddingBackend


@dataclass(frozen=True)
class PipelineConfig:
    mode: CanonMode = CanonMode.TARGET
    iterations: int = 1
    retrieval_k: int = 10
    canon: CanonConfig | None = None
    oie: OieConfig = dataclasses.field(default_factory=OieConfig)

    def __post_init__(self) -> None:
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.retrieval_k < 1:
            raise ValueError("retrieval_k must be >= 1")
        if self.canon is None:
            object.__setattr__(self, "canon", CanonConfig(mode=self.mode))
        elif self.canon.mode is not self.mode:
            raise ValueError("canonicalization mode must match the pipeline mode")


def _dedupe(items: Sequence[str]) -> tuple[str, ...]:
    return tuple(dict.fromkeys(item for item in items if item))


def build_hint(
    prev: ExtractionRecord,
    text: str,
    state: CanonicalSchemaState,
    backends: Backends,
    retrieval_k: int = 10,
    oie_cfg: OieConfig | None = None,
) -> tuple[Hint, list[str]]:
    """Assemble the refinement hint for one document.

    Candidate entities merge the previous round's triplet arguments with a
    fresh LLM entity extraction; candidate relations merge the previous
    round's relations with schema retrieval hits. A retrieval or entity
    failure degrades the hint with a warning instead of aborting the run.
    """
    warnings: list[str] = []

    entities: list[str] = []
    for t in prev.canonical_triplets:
        entities.extend((t.subject, t.object))
    try:
        extracted, entity_warnings = extract_entities(
            text, oie_cfg or OieConfig(), backends.chat
        )
        warnings.extend(entity_warnings)
        entities.extend(extracted)
    except TransportError as exc:
        warnings.append(f"entity extraction unavailable, hint degraded: {exc}")

    relations: list[str] = [t.relation for t in prev.canonical_triplets]
    if len(state.index) > 0:
        try:
            hits = retrieve_relations(text, state.index, backends.embedder, retrieval_k)
            relations.extend(h.key for h in hits)
        except TransportError as exc:
            warnings.append(f"schema retrieval unavailable, hint degraded: {exc}")
    candidate_relations = tuple(
        (name, state.schema.definition_of(name)) for name in _dedupe(relations)
    )
    return Hint(_dedupe(entities), candidate_relations), warnings


def _record(
    doc: Document,
    iteration: int,
    oie: Sequence[Triplet],
    definitions: dict[str, str],
    canonical: Sequence[Triplet],
    actions: Sequence,
    warnings: Sequence[str],
) -> ExtractionRecord:
    return ExtractionRecord(
        document_id=doc.id,
        iteration=iteration,
        oie_triplets=tuple(oie),
        definitions=definitions,
        canonical_triplets=tuple(canonical),
        actions=tuple(actions),
        warnings=tuple(warnings),
    )


def _downgraded(doc: Document, iteration: int, prev: ExtractionRecord | None, reason: str) -> ExtractionRecord:
    """Carry a failed document forward on its last successful output."""
    logger.warning("document %s downgraded at iteration %d: %s", doc.id, iteration, reason)
    if prev is None:
        return _record(doc, iteration, (), {}, (), (), (f"downgraded: {reason}",))
    return _record(
        doc,
        iteration,
        prev.oie_triplets,
        dict(prev.definitions),
        prev.canonical_triplets,
        prev.actions,
        tuple(prev.warnings) + (f"downgraded: {reason}",),
    )


def _process(
    doc: Document,
    iteration: int,
    hint: Hint | None,
    cfg: PipelineConfig,
    backends: Backends,
    state: CanonicalSchemaState,
    hint_warnings: Sequence[str] = (),
) -> ExtractionRecord:
    warnings = list(hint_warnings)
    known: dict[str, str] = {}
    if hint is not None:
        triplets, extract_warnings = extract_refined(doc.text, hint, cfg.oie, backends.chat)
    elif cfg.oie.combined_mode:
        triplets, known, extract_warnings = extract_with_definitions(
            doc.text, cfg.oie, backends.chat
        )
    else:
        triplets, extract_warnings = extract_triplets(doc.text, cfg.oie, backends.chat)
    warnings.extend(extract_warnings)

    if not triplets:
        return _record(doc, iteration, (), {}, (), (), warnings)

    definitions, define_warnings = define_relations(
        doc.text, triplets, backends.chat, cfg.oie.few_shot, known=known or None
    )
    warnings.extend(define_warnings)

    canonical, actions = canonicalize_document(
        triplets, definitions, state, cfg.canon, doc.text, backends.chat, backends.embedder
    )
    return _record(doc, iteration, triplets, definitions, canonical, actions, warnings)


def _run_pass(
    docs: Sequence[Document],
    iteration: int,
    prev_records: Sequence[ExtractionRecord] | None,
    cfg: PipelineConfig,
    backends: Backends,
    state: CanonicalSchemaState,
    jobs: int,
) -> list[ExtractionRecord]:
    def one(i: int) -> ExtractionRecord:
        doc = docs[i]
        prev = prev_records[i] if prev_records is not None else None
        try:
            hint = None
            hint_warnings: list[str] = []
            if prev is not None:
                hint, hint_warnings = build_hint(
                    prev, doc.text, state, backends, cfg.retrieval_k, cfg.oie
                )
            return _process(doc, iteration, hint, cfg, backends, state, hint_warnings)
        except TransportError as exc:
            return _downgraded(doc, iteration, prev, str(exc))

    # Self mode serializes: the schema state is a single-writer resource.
    if cfg.mode is CanonMode.TARGET and jobs > 1 and len(docs) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(one, range(len(docs))))
    return [one(i) for i in range(len(docs))]


def run_pipeline(
    docs: Sequence[Document],
    cfg: PipelineConfig,
    backends: Backends,
    target_schema: Schema | None = None,
    jobs: int = 1,
) -> tuple[list[ExtractionRecord], Schema]:
    """Run the full pipeline: base pass plus ``cfg.iterations`` refinement rounds.

    Target mode requires ``target_schema`` with definitions; self mode starts
    from an empty canonical schema, and the schema it constructs serves as the
    alignment and retrieval base for later iterations. Returns records for
    every document at every iteration (count = len(docs) * (iterations + 1))
    and the final schema.
    """
    if cfg.mode is CanonMode.TARGET:
        if target_schema is None or len(target_schema) == 0:
            raise ValueError("target mode requires a non-empty target schema")
        state = build_target_index(target_schema, backends.embedder)
    else:
        if target_schema is not None and len(target_schema) > 0:
            raise ValueError("self mode starts from an empty schema")
        state = CanonicalSchemaState.empty()

    all_records: list[ExtractionRecord] = []
    current = _run_pass(docs, 0, None, cfg, backends, state, jobs)
    all_records.extend(current)
    for iteration in range(1, cfg.iterations + 1):
        current = _run_pass(docs, iteration, current, cfg, backends, state, jobs)
        all_records.extend(current)
    return all_records, state.schema


def run_single_pass(
    docs: Sequence[Document],
    cfg: PipelineConfig,
    backends: Backends,
    target_schema: Schema | None = None,
    jobs: int = 1,
) -> tuple[list[ExtractionRecord], Schema]:
    """One extract-define-canonicalize pass with no refinement."""
    return run_pipeline(
        docs, dataclasses.replace(cfg, iterations=0), backends, target_schema, jobs
    )
