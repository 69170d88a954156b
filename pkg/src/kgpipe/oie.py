"""Open triplet extraction: plain, entity-only, hint-refined, and combined modes."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING

from .gateway import ChatBackend, user_request
from .model import Triplet, dedupe_triplets
from .parsing import parse_definitions, parse_entity_list, parse_triplet_list
from .prompts import (
    FewShotRecord,
    combined_template,
    entity_template,
    format_string_list,
    oie_template,
    refined_oie_template,
    relation_hint_block,
)

if TYPE_CHECKING:
    from .pipeline import Hint

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OieConfig:
    """Extraction settings.

    ``few_shot`` examples come from a user-supplied file; six is the
    recommended count. ``combined_mode`` asks for relation definitions in the
    same prompt as the triplets.
    """

    few_shot: tuple[FewShotRecord, ...] = ()
    combined_mode: bool = False
    max_parse_retries: int = 1


def _ask(gateway: ChatBackend, prompt: str) -> tuple[str, list[str]]:
    result = gateway.complete(user_request(prompt))
    warnings = ["reply truncated at token limit"] if result.truncated else []
    return result.text, warnings


def _extract_with_prompt(
    prompt: str, cfg: OieConfig, gateway: ChatBackend
) -> tuple[list[Triplet], list[str]]:
    """Run one extraction prompt, re-asking when nothing parses."""
    warnings: list[str] = []
    for attempt in range(cfg.max_parse_retries + 1):
        text, ask_warnings = _ask(gateway, prompt)
        warnings.extend(ask_warnings)
        triplets, parse_warnings = parse_triplet_list(text)
        if triplets or not parse_warnings:
            warnings.extend(parse_warnings)
            return dedupe_triplets(triplets), warnings
        if attempt < cfg.max_parse_retries:
            logger.debug("unparseable extraction reply, re-asking")
    warnings.extend(parse_warnings)
    warnings.append("extraction failed to parse after retries")
    return [], warnings


def extract_triplets(
    text: str, cfg: OieConfig, gateway: ChatBackend
) -> tuple[list[Triplet], list[str]]:
    """Extract open triplets from one text. An empty result is a valid outcome."""
    if not text.strip():
        raise ValueError("text must be non-empty")
    prompt = oie_template(cfg.few_shot).render(text=text)
    return _extract_with_prompt(prompt, cfg, gateway)


def extract_entities(
    text: str, cfg: OieConfig, gateway: ChatBackend
) -> tuple[list[str], list[str]]:
    """Extract a deduplicated entity list from one text."""
    if not text.strip():
        raise ValueError("text must be non-empty")
    prompt = entity_template(cfg.few_shot).render(text=text)
    reply, warnings = _ask(gateway, prompt)
    entities, parse_warnings = parse_entity_list(reply)
    return entities, warnings + parse_warnings


def extract_refined(
    text: str, hint: "Hint", cfg: OieConfig, gateway: ChatBackend
) -> tuple[list[Triplet], list[str]]:
    """Extract triplets with candidate entities and relations in the prompt.

    An empty hint falls back to the plain extraction prompt, so the hint
    sections never render as empty blocks.
    """
    if not text.strip():
        raise ValueError("text must be non-empty")
    if not hint.candidate_entities and not hint.candidate_relations:
        return extract_triplets(text, cfg, gateway)
    prompt = refined_oie_template(cfg.few_shot).render(
        text=text,
        entities=format_string_list(hint.candidate_entities),
        relation_hints=relation_hint_block(hint.candidate_relations),
    )
    return _extract_with_prompt(prompt, cfg, gateway)


def extract_with_definitions(
    text: str, cfg: OieConfig, gateway: ChatBackend
) -> tuple[list[Triplet], dict[str, str], list[str]]:
    """Combined mode: one prompt yields triplets plus a definition per relation.

    Relations the reply leaves undefined are reported in the warnings; the
    definition stage backfills them.
    """
    if not cfg.combined_mode:
        raise ValueError("combined_mode is disabled in this configuration")
    if not text.strip():
        raise ValueError("text must be non-empty")
    prompt = combined_template(cfg.few_shot).render(text=text)
    warnings: list[str] = []
    reply, ask_warnings = _ask(gateway, prompt)
    warnings.extend(ask_warnings)
    triplets, parse_warnings = parse_triplet_list(reply)
    warnings.extend(parse_warnings)
    triplets = dedupe_triplets(triplets)
    definitions: dict[str, str] = {}
    relations = list(dict.fromkeys(t.relation for t in triplets))
    if relations:
        definitions, missing = parse_definitions(reply, relations)
        if missing:
            warnings.append(f"combined reply left {len(missing)} relations undefined")
    return triplets, definitions, warnings
