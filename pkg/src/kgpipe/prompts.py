"""Prompt templates for every LLM subtask, plus the wire serializers they share."""

from __future__ import annotations

import string
from dataclasses import dataclass
from typing import Mapping, Sequence

from .model import Triplet


class PromptError(ValueError):
    """A template placeholder was left unbound at render time."""


def quote(value: str) -> str:
    """Single-quote a string for the bracketed list format, escaping as needed."""
    escaped = value.replace("\\", "\\\\").replace("'", "\\'")
    return f"'{escaped}'"


def format_string_list(values: Sequence[str]) -> str:
    return "[" + ", ".join(quote(v) for v in values) + "]"


def format_triplet(triplet: Triplet) -> str:
    return format_string_list(triplet.as_tuple())


def format_triplet_list(triplets: Sequence[Triplet]) -> str:
    return "[" + ", ".join(format_triplet(t) for t in triplets) + "]"


def format_definitions(definitions: Mapping[str, str]) -> str:
    return "\n".join(f"{name}: {text}" for name, text in definitions.items())


@dataclass(frozen=True)
class FewShotRecord:
    """One worked example: a text with its triplets and optional extras.

    ``entities`` defaults to the unique subjects and objects of the triplets,
    in first-seen order, when the example file does not list them.
    """

    text: str
    triplets: tuple[Triplet, ...]
    entities: tuple[str, ...] | None = None
    definitions: Mapping[str, str] | None = None

    def entity_list(self) -> tuple[str, ...]:
        if self.entities is not None:
            return self.entities
        seen: list[str] = []
        for t in self.triplets:
            for item in (t.subject, t.object):
                if item not in seen:
                    seen.append(item)
        return tuple(seen)


@dataclass(frozen=True)
class PromptTemplate:
    """A three-part few-shot prompt: instruction, worked examples, query.

    Rendering is deterministic: identical (template, vars) produce identical
    bytes. Examples are numbered in the order supplied.
    """

    header: str
    example_template: str
    query_template: str
    examples: tuple[Mapping[str, str], ...] = ()

    def render(self, **values: str) -> str:
        parts = [self.header]
        if self.examples:
            parts.append("Here are some examples:")
            for i, example in enumerate(self.examples, start=1):
                parts.append(f"Example {i}:")
                parts.append(_substitute(self.example_template, example))
        parts.append(_substitute(self.query_template, values))
        return "\n\n".join(parts)


def _substitute(template: str, values: Mapping[str, str]) -> str:
    try:
        return string.Template(template).substitute(values)
    except KeyError as exc:
        raise PromptError(f"unbound placeholder {exc.args[0]!r}") from exc


_OIE_HEADER = (
    "Given a piece of text, extract relational triplets in the form of "
    "[Subject, Relation, Object] from it."
)


def oie_template(examples: Sequence[FewShotRecord]) -> PromptTemplate:
    return PromptTemplate(
        header=_OIE_HEADER,
        example_template="Text: ${text}\n\nTriplets: ${triplets}",
        query_template="Now please extract triplets from the following text:\n${text}",
        examples=tuple(
            {"text": ex.text, "triplets": format_triplet_list(ex.triplets)}
            for ex in examples
        ),
    )


def entity_template(examples: Sequence[FewShotRecord]) -> PromptTemplate:
    return PromptTemplate(
        header="Given a piece of text, extract a list of entities from it.",
        example_template="Text: ${text}\n\nEntities: ${entities}",
        query_template="Now please extract entities from the following text:\n${text}",
        examples=tuple(
            {"text": ex.text, "entities": format_string_list(ex.entity_list())}
            for ex in examples
        ),
    )


def refined_oie_template(examples: Sequence[FewShotRecord]) -> PromptTemplate:
    """Extraction prompt that also carries candidate entities and relation hints."""
    return PromptTemplate(
        header=_OIE_HEADER,
        example_template="Text: ${text}\n\nEntities: ${entities}\n\nTriplets: ${triplets}",
        query_template=(
            "Now please extract triplets from the following text:\n${text}\n"
            "Entities: ${entities}\n\n"
            "Here are some potential relations and their descriptions you may "
            "look out for during extraction: \n${relation_hints}"
        ),
        examples=tuple(
            {
                "text": ex.text,
                "entities": format_string_list(ex.entity_list()),
                "triplets": format_triplet_list(ex.triplets),
            }
            for ex in examples
        ),
    )


def definition_template(examples: Sequence[FewShotRecord]) -> PromptTemplate:
    return PromptTemplate(
        header=(
            "Given a piece of text and a list of relational triplets extracted "
            "from it, write a definition for each relation present."
        ),
        example_template=(
            "Text: ${text}\n\nTriplets: ${triplets}\n\nDefinitions:\n\n${definitions}"
        ),
        query_template=(
            "Now write a definition for each relation present in the triplets "
            "extracted from the following text:\n\nText: ${text}\n\nTriplets: ${triplets}"
        ),
        examples=tuple(
            {
                "text": ex.text,
                "triplets": format_triplet_list(ex.triplets),
                "definitions": format_definitions(ex.definitions),
            }
            for ex in examples
            if ex.definitions
        ),
    )


def combined_template(examples: Sequence[FewShotRecord]) -> PromptTemplate:
    """Single prompt asking for triplets and their relation definitions together."""
    return PromptTemplate(
        header=(
            "Given a piece of text, extract relational triplets in the form of "
            "[Subject, Relation, Object] from it, then write a definition for "
            "each relation present."
        ),
        example_template=(
            "Text: ${text}\n\nTriplets: ${triplets}\n\nDefinitions:\n\n${definitions}"
        ),
        query_template=(
            "Now please extract triplets from the following text and write a "
            "definition for each relation present:\n${text}"
        ),
        examples=tuple(
            {
                "text": ex.text,
                "triplets": format_triplet_list(ex.triplets),
                "definitions": format_definitions(ex.definitions),
            }
            for ex in examples
            if ex.definitions
        ),
    )


CHOICE_LETTERS = string.ascii_uppercase

NONE_OF_THE_ABOVE = "None of the above"


def mcq_prompt(
    text: str,
    triplet: Triplet,
    definition: str,
    choices: Sequence[tuple[str, str]],
) -> str:
    """Render the relation-replacement multiple-choice prompt.

    ``choices`` are (name, definition) pairs in descending similarity order;
    the letter after the last candidate is always "None of the above".
    """
    if not choices:
        raise ValueError("mcq needs at least one candidate")
    if len(choices) >= len(CHOICE_LETTERS):
        raise ValueError("too many candidates for single-letter choices")
    lines = [
        f"{CHOICE_LETTERS[i]}. {quote(name)}: {definition}"
        for i, (name, definition) in enumerate(choices)
    ]
    lines.append(f"{CHOICE_LETTERS[len(choices)]}. {NONE_OF_THE_ABOVE}")
    body = "\n\n".join(lines)
    return (
        "Given a piece of text, a relational triplet extracted from it, and the "
        "definition of the relation in it, choose the most appropriate relation "
        "to replace it in this context if there is any.\n\n"
        f"Text: {text}\n\n"
        f"Triplets: {format_triplet(triplet)}\n\n"
        f"Definition of {quote(triplet.relation)}: {definition}\n\n"
        "Choices:\n\n"
        f"{body}"
    )


def relation_hint_block(relations: Sequence[tuple[str, str | None]]) -> str:
    """Numbered candidate relations, each with its definition when known."""
    lines = []
    for i, (name, definition) in enumerate(relations, start=1):
        if definition:
            lines.append(f"{i}. {name}: {definition}")
        else:
            lines.append(f"{i}. {name}")
    return "\n\n".join(lines)
