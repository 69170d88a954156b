"""Domain types shared across the pipeline: triplets, relation schemas, documents."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Mapping

_RELATION_FORBIDDEN = ("[", "]", ",")


def normalize_relation(name: str) -> str:
    """Trim a relation name and collapse internal whitespace runs to single spaces.

    Case is preserved: "bornOn" and "BornOn" stay distinct. Empty input yields
    an empty string, which callers must reject.
    """
    return " ".join(name.split())


@dataclass(frozen=True)
class Triplet:
    """One (subject, relation, object) fact.

    Subject and object are stored verbatim apart from trimming; the relation is
    whitespace-normalized. All three fields must be non-empty and the relation
    must be a single phrase without list delimiters.
    """

    subject: str
    relation: str
    object: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "subject", self.subject.strip())
        object.__setattr__(self, "relation", normalize_relation(self.relation))
        object.__setattr__(self, "object", self.object.strip())
        for name in ("subject", "relation", "object"):
            if not getattr(self, name):
                raise ValueError(f"triplet {name} must be non-empty")
        if any(ch in self.relation for ch in _RELATION_FORBIDDEN):
            raise ValueError(f"relation contains a list delimiter: {self.relation!r}")

    def as_tuple(self) -> tuple[str, str, str]:
        return (self.subject, self.relation, self.object)

    def with_relation(self, relation: str) -> "Triplet":
        """Return a copy with the relation slot rewritten; subject/object untouched."""
        return Triplet(self.subject, relation, self.object)


def dedupe_triplets(triplets: Iterable[Triplet]) -> list[Triplet]:
    """Drop exact duplicates, keeping the first occurrence and input order.

    Triplet construction already normalizes fields, so equality is plain
    field-wise comparison. Idempotent.
    """
    seen: set[tuple[str, str, str]] = set()
    out: list[Triplet] = []
    for t in triplets:
        key = t.as_tuple()
        if key not in seen:
            seen.add(key)
            out.append(t)
    return out


@dataclass(frozen=True)
class RelationDefinition:
    """A relation name paired with its one-sentence natural-language definition."""

    name: str
    definition: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "name", normalize_relation(self.name))
        object.__setattr__(self, "definition", self.definition.strip())
        if not self.name:
            raise ValueError("relation name must be non-empty")
        if not self.definition:
            raise ValueError(f"definition for {self.name!r} must be non-empty")


class Schema:
    """Ordered mapping from relation name to its definition.

    Names are unique under :func:`normalize_relation` (exact, case-sensitive
    comparison after whitespace normalization). Iteration order is insertion
    order, which downstream code relies on for deterministic tie-breaking.
    Instances are single-writer: the canonicalizer may append entries, but
    concurrent mutation is not supported.
    """

    def __init__(self, entries: Iterable[RelationDefinition] = ()) -> None:
        self._entries: dict[str, RelationDefinition] = {}
        for entry in entries:
            self.add(entry)

    def add(self, entry: RelationDefinition) -> None:
        if entry.name in self._entries:
            raise ValueError(f"duplicate relation in schema: {entry.name!r}")
        self._entries[entry.name] = entry

    def get(self, name: str) -> RelationDefinition | None:
        return self._entries.get(normalize_relation(name))

    def definition_of(self, name: str) -> str | None:
        entry = self.get(name)
        return entry.definition if entry is not None else None

    def names(self) -> tuple[str, ...]:
        return tuple(self._entries)

    def entries(self) -> tuple[RelationDefinition, ...]:
        return tuple(self._entries.values())

    def copy(self) -> "Schema":
        return Schema(self.entries())

    def __contains__(self, name: object) -> bool:
        return isinstance(name, str) and normalize_relation(name) in self._entries

    def __iter__(self) -> Iterator[str]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Schema):
            return NotImplemented
        return self._entries == other._entries

    def __repr__(self) -> str:
        return f"Schema({len(self)} relations)"


@dataclass(frozen=True)
class Document:
    """One input text with an id and optional reference triplets for evaluation."""

    id: str
    text: str
    reference_triplets: tuple[Triplet, ...] | None = None

    def __post_init__(self) -> None:
        if not self.id.strip():
            raise ValueError("document id must be non-empty")
        if not self.text.strip():
            raise ValueError(f"document {self.id!r} has empty text")


class ActionKind(str, Enum):
    ALIGNED = "aligned"
    DROPPED = "dropped"
    ADDED = "added"


@dataclass(frozen=True)
class CanonicalizationAction:
    """Audit record of how one open relation was handled.

    ``target_relation`` is present exactly when ``kind`` is ALIGNED.
    """

    kind: ActionKind
    source_relation: str
    target_relation: str | None = None

    def __post_init__(self) -> None:
        if self.kind is ActionKind.ALIGNED:
            if not self.target_relation:
                raise ValueError("aligned action requires a target relation")
        elif self.target_relation is not None:
            raise ValueError(f"{self.kind.value} action must not carry a target relation")


@dataclass(frozen=True)
class ExtractionRecord:
    """Per-document, per-iteration output of the pipeline.

    ``actions`` is parallel to ``oie_triplets``: replaying the aligned renames
    (and drops) over the open triplets reproduces ``canonical_triplets``.
    """

    document_id: str
    iteration: int
    oie_triplets: tuple[Triplet, ...]
    definitions: Mapping[str, str]
    canonical_triplets: tuple[Triplet, ...]
    actions: tuple[CanonicalizationAction, ...]
    warnings: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        if self.iteration < 0:
            raise ValueError("iteration must be >= 0")
        missing = [t.relation for t in self.oie_triplets if t.relation not in self.definitions]
        if missing:
            raise ValueError(f"open relations lack definitions: {sorted(set(missing))}")
