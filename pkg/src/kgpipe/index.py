"""Cosine-similarity vector index plus the retrieval loss and recall metrics.

The index is a brute-force linear scan: schemas here hold at most a few
hundred relations, so approximate nearest-neighbor structures would be
unjustified complexity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .embedding import EmbeddingBackend, RetrievalInstruction, embed, normalize

DEFINITION_SIMILARITY = "definition_similarity"
TEXT_RELEVANCE = "text_relevance"
_MODES = (DEFINITION_SIMILARITY, TEXT_RELEVANCE)


@dataclass(frozen=True)
class SimilarityHit:
    key: str
    score: float


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity of two vectors; result clipped into [-1, 1]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    denom = float(np.linalg.norm(a)) * float(np.linalg.norm(b))
    if denom == 0.0:
        raise ValueError("cosine undefined for zero vectors")
    return float(np.clip(float(np.dot(a, b)) / denom, -1.0, 1.0))


class VectorIndex:
    """Ordered (key, unit vector) entries with stable tie-breaking.

    Keys are unique; insertion order is preserved and breaks score ties in
    :meth:`top_k`. Append-only; safe for concurrent queries once built.
    """

    def __init__(self, mode: str = DEFINITION_SIMILARITY) -> None:
        if mode not in _MODES:
            raise ValueError(f"unknown index mode: {mode!r}")
        self.mode = mode
        self._keys: list[str] = []
        self._positions: dict[str, int] = {}
        self._vectors: list[np.ndarray] = []
        self._matrix: np.ndarray | None = None

    def append(self, key: str, vector: np.ndarray) -> None:
        if key in self._positions:
            raise ValueError(f"duplicate index key: {key!r}")
        arr = normalize(vector)  # entries must be unit vectors so dot = cosine
        if self._vectors and arr.shape != self._vectors[0].shape:
            raise ValueError(
                f"dimension mismatch: index holds {self._vectors[0].shape}, got {arr.shape}"
            )
        self._positions[key] = len(self._keys)
        self._keys.append(key)
        self._vectors.append(arr)
        self._matrix = None

    @property
    def keys(self) -> tuple[str, ...]:
        return tuple(self._keys)

    def vector(self, key: str) -> np.ndarray:
        return self._vectors[self._positions[key]]

    def __contains__(self, key: object) -> bool:
        return key in self._positions

    def __len__(self) -> int:
        return len(self._keys)

    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            self._matrix = np.vstack(self._vectors) if self._vectors else np.empty((0, 0))
        return self._matrix

    def scores(self, query: np.ndarray) -> np.ndarray:
        if not self._vectors:
            raise ValueError("index is empty")
        q = normalize(query)
        if q.shape != self._vectors[0].shape:
            raise ValueError(f"dimension mismatch: {q.shape} vs {self._vectors[0].shape}")
        return self.matrix() @ q


def top_k(index: VectorIndex, query: np.ndarray, k: int) -> list[SimilarityHit]:
    """The min(k, |index|) entries most similar to the query, scores descending.

    Ties are broken by insertion order (stable sort on negated scores).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    scores = index.scores(query)
    order = np.argsort(-scores, kind="stable")[:k]
    return [SimilarityHit(index.keys[i], float(scores[i])) for i in order]


def retrieve_relations(
    text: str,
    schema_index: VectorIndex,
    backend: EmbeddingBackend,
    k: int = 10,
    instruction: RetrievalInstruction | None = None,
) -> list[SimilarityHit]:
    """Rank schema relations by relevance to a text.

    The query is embedded under the retrieval instruction; index entries were
    embedded without it.
    """
    if len(schema_index) == 0:
        raise ValueError("schema index is empty")
    query = embed(backend, [text], instruction=instruction or RetrievalInstruction())[0]
    return top_k(schema_index, query, k)


def info_nce_loss(positive_sim: float, negative_sims: Sequence[float]) -> float:
    """Contrastive loss over raw cosine similarities.

    Computes -log(p / (p + sum of negatives)) with negatives clamped at zero,
    implementing the similarity-ratio form directly (no temperature or
    exponential). The positive similarity must be strictly positive to keep
    the log domain valid.
    """
    if not math.isfinite(positive_sim) or positive_sim <= 0.0:
        raise ValueError(f"positive similarity must be finite and > 0, got {positive_sim}")
    total = positive_sim
    for sim in negative_sims:
        if not math.isfinite(sim):
            raise ValueError(f"negative similarity must be finite, got {sim}")
        total += max(sim, 0.0)
    return -math.log(positive_sim / total)


def recall_at_k(
    pairs: Sequence[tuple[str, Sequence[str]]],
    schema_index: VectorIndex,
    backend: EmbeddingBackend,
    k: int,
    instruction: RetrievalInstruction | None = None,
) -> float:
    """Mean over (text, gold relations) pairs of the top-k gold coverage.

    Raises:
        ValueError: a gold relation is missing from the index, which signals a
            schema/dataset mismatch rather than a retrieval miss.
    """
    if not pairs:
        raise ValueError("pairs must be non-empty")
    total = 0.0
    for text, gold in pairs:
        gold_set = set(gold)
        if not gold_set:
            raise ValueError(f"empty gold relation set for text: {text[:60]!r}")
        missing = [g for g in gold_set if g not in schema_index]
        if missing:
            raise ValueError(f"gold relations missing from index: {sorted(missing)}")
        hits = retrieve_relations(text, schema_index, backend, k, instruction)
        retrieved = {h.key for h in hits}
        total += len(gold_set & retrieved) / len(gold_set)
    return total / len(pairs)
