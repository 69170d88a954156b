"""Relation definition stage: one natural-language sentence per open relation."""

from __future__ import annotations

import logging
from typing import Sequence

from .gateway import ChatBackend, user_request
from .model import Triplet
from .parsing import parse_definitions
from .prompts import FewShotRecord, definition_template, format_triplet_list

logger = logging.getLogger(__name__)

FALLBACK_TEMPLATE = "The subject entity has the relation '{name}' to the object entity."


def define_relations(
    text: str,
    triplets: Sequence[Triplet],
    gateway: ChatBackend,
    examples: Sequence[FewShotRecord] = (),
    known: dict[str, str] | None = None,
) -> tuple[dict[str, str], list[str]]:
    """Obtain a definition for every distinct relation in ``triplets``.

    Definitions are requested per document in one batched prompt; the text
    context disambiguates homonyms, so nothing is cached across documents.
    Relations the model omits get one re-ask scoped to the leftovers, then the
    fallback sentence with a warning. ``known`` seeds definitions already in
    hand (combined extraction mode) so only the gaps are requested.

    Returns:
        (definitions, warnings). The definition keys always equal the distinct
        relations of the input triplets.
    """
    if not triplets:
        raise ValueError("triplets must be non-empty")
    relations = list(dict.fromkeys(t.relation for t in triplets))
    definitions: dict[str, str] = {}
    if known:
        definitions.update({r: known[r] for r in relations if r in known})
    warnings: list[str] = []

    pending = [r for r in relations if r not in definitions]
    if pending:
        found, missing = _ask_for(text, triplets, pending, gateway, examples, warnings)
        definitions.update(found)
        if missing:
            # One re-ask, restricted to the triplets whose relations are missing.
            retry_triplets = [t for t in triplets if t.relation in missing]
            found, missing = _ask_for(
                text, retry_triplets, sorted(missing), gateway, examples, warnings
            )
            definitions.update(found)
            for name in missing:
                definitions[name] = FALLBACK_TEMPLATE.format(name=name)
                warnings.append(f"fallback definition used for relation {name!r}")

    # Preserve the relations' first-seen order in the returned map.
    return {r: definitions[r] for r in relations}, warnings


def _ask_for(
    text: str,
    triplets: Sequence[Triplet],
    relations: Sequence[str],
    gateway: ChatBackend,
    examples: Sequence[FewShotRecord],
    warnings: list[str],
) -> tuple[dict[str, str], set[str]]:
    prompt = definition_template(examples).render(
        text=text, triplets=format_triplet_list(triplets)
    )
    result = gateway.complete(user_request(prompt))
    if result.truncated:
        warnings.append("definition reply truncated at token limit")
    return parse_definitions(result.text, list(relations))
