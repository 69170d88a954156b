"""Schema canonicalization: similarity-ranked candidates verified by an LLM MCQ.

Two modes share the machinery. Target mode aligns open relations onto a fixed
schema and drops what cannot be aligned; self mode starts from an empty schema
and appends relations that have no existing equivalent, so nothing is ever
dropped.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

from .embedding import EmbeddingBackend, embed
from .gateway import ChatBackend, user_request
from .index import DEFINITION_SIMILARITY, VectorIndex, top_k
from .model import (
    ActionKind,
    CanonicalizationAction,
    RelationDefinition,
    Schema,
    Triplet,
)
from .parsing import AmbiguousAnswerError, parse_mcq_answer
from .prompts import mcq_prompt

logger = logging.getLogger(__name__)


class CanonMode(str, Enum):
    TARGET = "target"
    SELF = "self"


@dataclass(frozen=True)
class CanonConfig:
    """Canonicalization settings.

    ``exact_match_shortcut`` skips the MCQ when the open relation name already
    exists in the schema; disable it for fidelity experiments.
    """

    mode: CanonMode = CanonMode.TARGET
    candidate_k: int = 5
    exact_match_shortcut: bool = True

    def __post_init__(self) -> None:
        if self.candidate_k < 1:
            raise ValueError("candidate_k must be >= 1")


def _entry_text(name: str, definition: str) -> str:
    # The embedded representation of a relation, used on both sides of the
    # similarity search.
    return f"{name}: {definition}"


class CanonicalSchemaState:
    """A schema and its definition-similarity index, kept in lockstep.

    Single-writer: self-mode canonicalization appends sequentially; target
    mode never mutates, so concurrent reads are safe there.
    """

    def __init__(self, schema: Schema, index: VectorIndex) -> None:
        if set(index.keys) != set(schema.names()):
            raise ValueError("index keys must equal schema relation names")
        self.schema = schema
        self.index = index

    @classmethod
    def empty(cls) -> "CanonicalSchemaState":
        return cls(Schema(), VectorIndex(DEFINITION_SIMILARITY))

    @classmethod
    def from_schema(
        cls, schema: Schema, embedder: EmbeddingBackend
    ) -> "CanonicalSchemaState":
        index = VectorIndex(DEFINITION_SIMILARITY)
        entries = schema.entries()
        if entries:
            texts = [_entry_text(e.name, e.definition) for e in entries]
            for entry, vector in zip(entries, embed(embedder, texts)):
                index.append(entry.name, vector)
        return cls(schema.copy(), index)

    def add(self, entry: RelationDefinition, embedder: EmbeddingBackend) -> None:
        """Append a relation to schema and index together (embed once, at add time)."""
        vector = embed(embedder, [_entry_text(entry.name, entry.definition)])[0]
        self.schema.add(entry)
        self.index.append(entry.name, vector)


def build_target_index(
    target_schema: Schema, embedder: EmbeddingBackend
) -> CanonicalSchemaState:
    """Embed a target schema for alignment.

    Every relation must carry a definition: definitions are the similarity
    substrate, so an empty or definition-less schema cannot anchor target mode.
    """
    if len(target_schema) == 0:
        raise ValueError("target schema must be non-empty")
    return CanonicalSchemaState.from_schema(target_schema, embedder)


def canonicalize_triplet(
    triplet: Triplet,
    definition: str,
    state: CanonicalSchemaState,
    cfg: CanonConfig,
    text: str,
    gateway: ChatBackend,
    embedder: EmbeddingBackend,
) -> tuple[Triplet | None, CanonicalizationAction]:
    """Align one open triplet against the canonical schema.

    Candidate relations come from a similarity search over the embedded
    relation definitions; the LLM then either picks a replacement or answers
    none-of-the-above, which drops the triplet (target mode) or appends the
    relation to the schema (self mode). Only the relation slot is ever
    rewritten.
    """
    if not definition.strip():
        raise ValueError(f"missing definition for relation {triplet.relation!r}")
    source = triplet.relation

    if cfg.exact_match_shortcut and source in state.schema:
        return triplet, CanonicalizationAction(ActionKind.ALIGNED, source, source)

    if len(state.schema) == 0:
        if cfg.mode is CanonMode.TARGET:
            raise ValueError("target mode requires a non-empty schema")
        state.add(RelationDefinition(source, definition), embedder)
        return triplet, CanonicalizationAction(ActionKind.ADDED, source)

    query = embed(embedder, [_entry_text(source, definition)])[0]
    hits = top_k(state.index, query, min(cfg.candidate_k, len(state.index)))
    choices = [(h.key, state.schema.definition_of(h.key) or "") for h in hits]
    choice = _ask_mcq(text, triplet, definition, choices, gateway)

    if choice is not None:
        target = choices[choice][0]
        return triplet.with_relation(target), CanonicalizationAction(
            ActionKind.ALIGNED, source, target
        )
    if cfg.mode is CanonMode.TARGET:
        return None, CanonicalizationAction(ActionKind.DROPPED, source)
    if source in state.schema:
        # Shortcut disabled and the MCQ declined anyway: the name is already
        # canonical, so adding again would corrupt the schema.
        return triplet, CanonicalizationAction(ActionKind.ALIGNED, source, source)
    state.add(RelationDefinition(source, definition), embedder)
    return triplet, CanonicalizationAction(ActionKind.ADDED, source)


def _ask_mcq(
    text: str,
    triplet: Triplet,
    definition: str,
    choices: Sequence[tuple[str, str]],
    gateway: ChatBackend,
) -> int | None:
    """One MCQ round with a single retry; persistent ambiguity means none-of-the-above.

    A wrong forced alignment corrupts the graph where a conservative answer
    only loses one triplet, hence the pessimistic default.
    """
    prompt = mcq_prompt(text, triplet, definition, choices)
    for attempt in range(2):
        reply = gateway.complete(user_request(prompt)).text
        try:
            return parse_mcq_answer(reply, len(choices))
        except AmbiguousAnswerError:
            if attempt == 0:
                logger.debug("ambiguous MCQ reply for %r, re-asking", triplet.relation)
    logger.warning("MCQ stayed ambiguous for %r; treating as none-of-the-above", triplet.relation)
    return None


def canonicalize_document(
    triplets: Sequence[Triplet],
    definitions: Mapping[str, str],
    state: CanonicalSchemaState,
    cfg: CanonConfig,
    text: str,
    gateway: ChatBackend,
    embedder: EmbeddingBackend,
) -> tuple[list[Triplet], list[CanonicalizationAction]]:
    """Canonicalize a document's triplets in input order.

    Order matters in self mode: relations appended for earlier triplets become
    candidates for later ones. The action list is parallel to the input, so
    replaying it reproduces the output. Target mode leaves ``state`` untouched.
    """
    out: list[Triplet] = []
    actions: list[CanonicalizationAction] = []
    for triplet in triplets:
        if triplet.relation not in definitions:
            raise ValueError(f"no definition supplied for relation {triplet.relation!r}")
        result, action = canonicalize_triplet(
            triplet, definitions[triplet.relation], state, cfg, text, gateway, embedder
        )
        actions.append(action)
        if result is not None:
            out.append(result)
    return out, actions
