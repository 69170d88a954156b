"""Lenient parsers for LLM output: bracketed lists, definition lines, MCQ answers.

Models wrap structured output in prose, vary quoting, and leave trailing
commas; everything here extracts what parses and reports the rest as
warnings instead of failing the batch.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .model import Triplet, normalize_relation
from .prompts import CHOICE_LETTERS


class AmbiguousAnswerError(ValueError):
    """The MCQ reply named zero or several choice letters."""


@dataclass(frozen=True)
class _Group:
    """One innermost bracketed group with its already-unquoted elements."""

    elements: tuple[str, ...]


def _scan_groups(text: str) -> list[_Group]:
    """Collect every innermost ``[...]`` group, honoring quotes and escapes.

    Brackets inside quoted strings do not open or close groups. A group that
    directly contains another group is a wrapper and is itself discarded.
    """
    groups: list[_Group] = []
    stack: list[list[str] | None] = []  # None marks a wrapper with nested groups
    element: list[str] = []
    quote_char: str | None = None
    escaped = False
    has_element_text = False

    def close_element(elements: list[str]) -> None:
        nonlocal has_element_text
        value = "".join(element).strip()
        element.clear()
        if value or has_element_text:
            elements.append(value)
        has_element_text = False

    for ch in text:
        if quote_char is not None:
            if escaped:
                element.append(ch)
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == quote_char:
                quote_char = None
                has_element_text = True
            else:
                element.append(ch)
            continue
        if not stack:
            if ch == "[":
                stack.append([])
                element.clear()
                has_element_text = False
            continue
        current = stack[-1]
        if ch in "'\"":
            quote_char = ch
        elif ch == "[":
            stack[-1] = None  # current group holds nested groups: wrapper
            stack.append([])
            element.clear()
            has_element_text = False
        elif ch == ",":
            if current is not None:
                close_element(current)
        elif ch == "]":
            if current is not None:
                close_element(current)
                groups.append(_Group(tuple(current)))
            stack.pop()
        else:
            element.append(ch)
    return groups


def parse_triplet_list(text: str) -> tuple[list[Triplet], list[str]]:
    """Extract every well-formed 3-element bracketed group as a triplet.

    Malformed groups are dropped with one warning each. An output that parses
    to nothing is only a warning when the text does not contain an explicit
    empty list.

    Returns:
        (triplets, warnings); triplets carry normalized fields.
    """
    warnings: list[str] = []
    triplets: list[Triplet] = []
    groups = _scan_groups(text)
    for group in groups:
        if not group.elements:
            continue  # an explicit empty list is a valid "nothing to extract"
        if len(group.elements) != 3:
            warnings.append(
                f"skipped group with {len(group.elements)} elements: {group.elements!r}"
            )
            continue
        try:
            triplets.append(Triplet(*group.elements))
        except ValueError as exc:
            warnings.append(f"skipped malformed triplet: {exc}")
    if not triplets and not warnings and not _has_empty_list(text):
        warnings.append("no triplets parsed from reply")
    return triplets, warnings


def parse_entity_list(text: str) -> tuple[list[str], list[str]]:
    """Extract entity strings from a bracketed list, deduplicated in order."""
    warnings: list[str] = []
    entities: list[str] = []
    seen: set[str] = set()
    groups = _scan_groups(text)
    for group in groups:
        for value in group.elements:
            trimmed = value.strip()
            if not trimmed:
                continue
            if trimmed not in seen:
                seen.add(trimmed)
                entities.append(trimmed)
    if not groups and not _has_empty_list(text):
        warnings.append("no entity list parsed from reply")
    return entities, warnings


def _has_empty_list(text: str) -> bool:
    return re.search(r"\[\s*\]", text) is not None


_LINE_PREFIX = re.compile(r"^\s*(?:[-*•]\s*|\d+[.)]\s*)?")


def parse_definitions(
    text: str, expected_relations: list[str]
) -> tuple[dict[str, str], set[str]]:
    """Collect ``name: sentence`` lines for the expected relations.

    Names match after whitespace normalization, case-sensitively; leading
    bullets, numbering, and quotes around the name are tolerated. The second
    return value is the set of expected relations left undefined.

    Raises:
        ValueError: when ``expected_relations`` is empty.
    """
    if not expected_relations:
        raise ValueError("expected_relations must be non-empty")
    wanted = {normalize_relation(r): r for r in expected_relations}
    found: dict[str, str] = {}
    for line in text.splitlines():
        line = _LINE_PREFIX.sub("", line)
        if ":" not in line:
            continue
        name, _, sentence = line.partition(":")
        name = normalize_relation(name.strip().strip("'\""))
        sentence = sentence.strip()
        if name in wanted and sentence and wanted[name] not in found:
            found[wanted[name]] = sentence
    missing = {r for r in wanted.values() if r not in found}
    return found, missing


def parse_mcq_answer(text: str, num_choices: int) -> int | None:
    """Map an MCQ reply to a candidate index, or None for "none of the above".

    Candidates use letters A.. and the letter after the last candidate is
    reserved for none-of-the-above. The reply must name exactly one distinct
    in-range letter as a standalone token.

    Raises:
        AmbiguousAnswerError: zero or several distinct letters named.
    """
    if num_choices < 1:
        raise ValueError("num_choices must be >= 1")
    valid = CHOICE_LETTERS[: num_choices + 1]
    letters = {
        m.group(1).upper()
        for m in re.finditer(r"(?<![A-Za-z])([A-Za-z])(?![A-Za-z])", text)
        if m.group(1).upper() in valid
    }
    if len(letters) != 1:
        raise AmbiguousAnswerError(f"ambiguous MCQ response: {text!r}")
    letter = letters.pop()
    index = valid.index(letter)
    return None if index == num_choices else index
