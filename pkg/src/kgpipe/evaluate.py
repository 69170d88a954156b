"""Token-level triplet scoring plus schema conciseness and redundancy metrics.

Scoring follows the named-entity-evaluation convention with three criteria:
``exact`` requires token-equal elements but lets an element match any slot of
its aligned triplet, ``partial`` additionally grants half credit for a token
overlap, and ``strict`` requires token equality in the corresponding slot.
"""

from __future__ import annotations

import itertools
import re
import string
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .index import VectorIndex
from .model import ExtractionRecord, Schema, Triplet


class MatchCriterion(str, Enum):
    EXACT = "exact"
    PARTIAL = "partial"
    STRICT = "strict"


class ElementJudgment(str, Enum):
    CORRECT = "correct"
    PARTIAL_MATCH = "partial_match"
    INCORRECT = "incorrect"
    MISSED = "missed"
    SPURIOUS = "spurious"


_CAMEL_BOUNDARY = re.compile(r"(?<=[a-z0-9])(?=[A-Z])")


def tokenize(element: str) -> tuple[str, ...]:
    """Lowercased whitespace tokens, stripped of surrounding punctuation.

    Camel-case boundaries split first, so "birthDate" and "birth date"
    produce the same tokens.
    """
    spaced = _CAMEL_BOUNDARY.sub(" ", element)
    tokens = []
    for raw in spaced.split():
        token = raw.strip(string.punctuation).lower()
        if token:
            tokens.append(token)
    return tuple(tokens)


def _element_score(cand: tuple[str, ...], ref: tuple[str, ...], criterion: MatchCriterion) -> float:
    if cand == ref:
        return 1.0
    if criterion is MatchCriterion.PARTIAL and set(cand) & set(ref):
        return 0.5
    return 0.0


def _pair_score(cand: Triplet, ref: Triplet, criterion: MatchCriterion) -> float:
    """Best total element score for one aligned candidate/reference pair.

    Strict keeps slots in correspondence; exact and partial disregard the
    slot, consuming each reference element at most once.
    """
    cand_tokens = [tokenize(e) for e in cand.as_tuple()]
    ref_tokens = [tokenize(e) for e in ref.as_tuple()]
    if criterion is MatchCriterion.STRICT:
        return sum(_element_score(c, r, criterion) for c, r in zip(cand_tokens, ref_tokens))
    best = 0.0
    for perm in itertools.permutations(range(3)):
        total = sum(
            _element_score(cand_tokens[i], ref_tokens[perm[i]], criterion) for i in range(3)
        )
        best = max(best, total)
    return best


@dataclass(frozen=True)
class DocumentScore:
    weighted_correct: float
    n_candidate_elements: int
    n_reference_elements: int
    judgments: tuple[ElementJudgment, ...] = field(default=(), compare=False)


def score_document(
    candidates: Sequence[Triplet],
    references: Sequence[Triplet],
    criterion: MatchCriterion,
) -> DocumentScore:
    """Score one document's candidate triplets against its references.

    Triplets are aligned one-to-one by an optimal assignment maximizing the
    total element score, which makes the result independent of input order.
    Unaligned candidate elements are spurious, unaligned reference elements
    missed.
    """
    n_cand, n_ref = len(candidates), len(references)
    if n_cand == 0 or n_ref == 0:
        judgments = (ElementJudgment.SPURIOUS,) * (3 * n_cand) + (
            ElementJudgment.MISSED,
        ) * (3 * n_ref)
        return DocumentScore(0.0, 3 * n_cand, 3 * n_ref, judgments)

    matrix = np.zeros((n_cand, n_ref))
    for i, cand in enumerate(candidates):
        for j, ref in enumerate(references):
            matrix[i, j] = _pair_score(cand, ref, criterion)
    rows, cols = linear_sum_assignment(matrix, maximize=True)
    weighted = float(matrix[rows, cols].sum())

    judgments = _judge(candidates, references, criterion, list(zip(rows, cols)))
    return DocumentScore(weighted, 3 * n_cand, 3 * n_ref, judgments)


def _judge(
    candidates: Sequence[Triplet],
    references: Sequence[Triplet],
    criterion: MatchCriterion,
    pairs: list[tuple[int, int]],
) -> tuple[ElementJudgment, ...]:
    judgments: list[ElementJudgment] = []
    matched_cands = {i for i, _ in pairs}
    matched_refs = {j for _, j in pairs}
    for i, j in pairs:
        cand_tokens = [tokenize(e) for e in candidates[i].as_tuple()]
        ref_tokens = [tokenize(e) for e in references[j].as_tuple()]
        slots = range(3) if criterion is MatchCriterion.STRICT else _best_perm(
            cand_tokens, ref_tokens, criterion
        )
        for s, r in enumerate(slots):
            if cand_tokens[s] == ref_tokens[r]:
                judgments.append(ElementJudgment.CORRECT)
            elif set(cand_tokens[s]) & set(ref_tokens[r]):
                judgments.append(ElementJudgment.PARTIAL_MATCH)
            else:
                judgments.append(ElementJudgment.INCORRECT)
    judgments.extend(
        ElementJudgment.SPURIOUS
        for i in range(len(candidates))
        if i not in matched_cands
        for _ in range(3)
    )
    judgments.extend(
        ElementJudgment.MISSED
        for j in range(len(references))
        if j not in matched_refs
        for _ in range(3)
    )
    return tuple(judgments)


def _best_perm(
    cand_tokens: list[tuple[str, ...]],
    ref_tokens: list[tuple[str, ...]],
    criterion: MatchCriterion,
) -> tuple[int, ...]:
    return max(
        itertools.permutations(range(3)),
        key=lambda perm: sum(
            _element_score(cand_tokens[i], ref_tokens[perm[i]], criterion) for i in range(3)
        ),
    )


def aggregate(scores: Sequence[DocumentScore]) -> tuple[float, float, float, list[str]]:
    """Micro-averaged precision, recall, F1 over per-document scores.

    Zero denominators yield 0 with a warning rather than an error.
    """
    if not scores:
        raise ValueError("need at least one document score")
    warnings: list[str] = []
    weighted = sum(s.weighted_correct for s in scores)
    n_cand = sum(s.n_candidate_elements for s in scores)
    n_ref = sum(s.n_reference_elements for s in scores)
    if n_cand == 0:
        warnings.append("no candidate elements; precision set to 0")
    if n_ref == 0:
        warnings.append("no reference elements; recall set to 0")
    precision = weighted / n_cand if n_cand else 0.0
    recall = weighted / n_ref if n_ref else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1, warnings


def redundancy_score(schema_index: VectorIndex) -> float:
    """Mean cosine similarity between each relation and its nearest other relation.

    Lower means the schema's relations are more semantically distinct. Defined
    as 0 for indices with at most one entry.
    """
    n = len(schema_index)
    if n <= 1:
        return 0.0
    matrix = schema_index.matrix()
    sims = matrix @ matrix.T
    np.fill_diagonal(sims, -np.inf)
    return float(np.mean(np.max(sims, axis=1)))


def schema_stats(
    schema: Schema, records: Sequence[ExtractionRecord]
) -> dict[str, float]:
    """Schema size and the mean number of final canonical triplets per document.

    Only each document's last iteration counts toward the average.
    """
    latest: dict[str, ExtractionRecord] = {}
    for record in records:
        held = latest.get(record.document_id)
        if held is None or record.iteration > held.iteration:
            latest[record.document_id] = record
    if latest:
        avg = sum(len(r.canonical_triplets) for r in latest.values()) / len(latest)
    else:
        avg = 0.0
    return {"schema_size": float(len(schema)), "avg_triplets_per_sentence": avg}


@dataclass(frozen=True)
class CriterionScores:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class EvalReport:
    """Per-criterion scores plus schema quality metrics and warning counters."""

    criteria: Mapping[str, CriterionScores]
    schema_size: int | None = None
    redundancy: float | None = None
    avg_triplets_per_sentence: float | None = None
    warnings: Mapping[str, int] = field(default_factory=dict)


def evaluate_documents(
    pairs: Sequence[tuple[Sequence[Triplet], Sequence[Triplet]]],
    criteria: Sequence[MatchCriterion] = tuple(MatchCriterion),
) -> tuple[dict[str, CriterionScores], Counter]:
    """Score (candidates, references) pairs under each requested criterion."""
    results: dict[str, CriterionScores] = {}
    warnings: Counter = Counter()
    for criterion in criteria:
        scores = [score_document(c, r, criterion) for c, r in pairs]
        precision, recall, f1, agg_warnings = aggregate(scores)
        for w in agg_warnings:
            warnings[w] += 1
        results[criterion.value] = CriterionScores(precision, recall, f1)
    return results, warnings
