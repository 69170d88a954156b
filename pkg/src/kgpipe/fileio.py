"""File formats: datasets, schemas, few-shot examples, results, reports, manifests.

Datasets and results are line-delimited JSON, one document per line, so they
stream and diff cleanly. Every writer here round-trips through its loader.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .evaluate import EvalReport
from .model import (
    ActionKind,
    CanonicalizationAction,
    Document,
    ExtractionRecord,
    RelationDefinition,
    Schema,
    Triplet,
)
from .prompts import FewShotRecord


class InputError(Exception):
    """A data file is missing or malformed. Exit code 2 territory."""


def _json_lines(path: Path) -> Iterable[tuple[int, dict]]:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}:{line_no}: invalid JSON: {exc}") from exc
        if not isinstance(record, dict):
            raise InputError(f"{path}:{line_no}: expected an object per line")
        yield line_no, record


def _triplet(raw: object, where: str) -> Triplet:
    if not isinstance(raw, (list, tuple)) or len(raw) != 3:
        raise InputError(f"{where}: triplet must be a 3-element list, got {raw!r}")
    try:
        return Triplet(*(str(part) for part in raw))
    except ValueError as exc:
        raise InputError(f"{where}: {exc}") from exc


def load_dataset(path: str | Path) -> list[Document]:
    """Read documents from JSONL records {"id", "text", "triplets"?}."""
    path = Path(path)
    documents: list[Document] = []
    seen_ids: set[str] = set()
    for line_no, record in _json_lines(path):
        where = f"{path}:{line_no}"
        doc_id = record.get("id")
        text = record.get("text")
        if not isinstance(doc_id, str) or not isinstance(text, str):
            raise InputError(f"{where}: records need string 'id' and 'text'")
        if doc_id in seen_ids:
            raise InputError(f"{where}: duplicate document id {doc_id!r}")
        seen_ids.add(doc_id)
        references: tuple[Triplet, ...] | None = None
        if "triplets" in record:
            raw = record["triplets"]
            if not isinstance(raw, list):
                raise InputError(f"{where}: 'triplets' must be a list")
            references = tuple(_triplet(t, where) for t in raw)
        try:
            documents.append(Document(doc_id, text, references))
        except ValueError as exc:
            raise InputError(f"{where}: {exc}") from exc
    return documents


def load_schema(path: str | Path) -> Schema:
    """Read a schema from a JSON map {name: definition} or a name,definition CSV."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return _load_schema_csv(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8") or "{}")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise InputError(f"{path}: schema file must hold a name -> definition map")
    return _build_schema(data.items(), str(path))


def _load_schema_csv(path: Path) -> Schema:
    try:
        with path.open(newline="", encoding="utf-8") as handle:
            reader = csv.DictReader(handle)
            fields = set(reader.fieldnames or ())
            if not {"name", "definition"}.issubset(fields):
                raise InputError(f"{path}: CSV needs a name,definition header")
            rows = [(row["name"], row["definition"]) for row in reader]
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    return _build_schema(rows, str(path))


def _build_schema(rows: Iterable[tuple[str, str]], where: str) -> Schema:
    schema = Schema()
    for name, definition in rows:
        try:
            schema.add(RelationDefinition(str(name), str(definition)))
        except ValueError as exc:
            raise InputError(f"{where}: {exc}") from exc
    return schema


def save_schema(schema: Schema, path: str | Path) -> None:
    payload = {entry.name: entry.definition for entry in schema.entries()}
    Path(path).write_text(
        json.dumps(payload, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )


def load_few_shot(path: str | Path) -> tuple[FewShotRecord, ...]:
    """Read few-shot examples: {"text", "triplets", "entities"?, "definitions"?}."""
    path = Path(path)
    records: list[FewShotRecord] = []
    for line_no, record in _json_lines(path):
        where = f"{path}:{line_no}"
        text = record.get("text")
        raw_triplets = record.get("triplets")
        if not isinstance(text, str) or not isinstance(raw_triplets, list):
            raise InputError(f"{where}: examples need string 'text' and list 'triplets'")
        triplets = tuple(_triplet(t, where) for t in raw_triplets)
        entities = None
        if "entities" in record:
            entities = tuple(str(e) for e in record["entities"])
        definitions = None
        if "definitions" in record:
            raw_defs = record["definitions"]
            if not isinstance(raw_defs, dict):
                raise InputError(f"{where}: 'definitions' must be an object")
            definitions = {str(k): str(v) for k, v in raw_defs.items()}
        records.append(FewShotRecord(text, triplets, entities, definitions))
    if not records:
        raise InputError(f"{path}: few-shot file must hold at least one example")
    return tuple(records)


def record_to_dict(record: ExtractionRecord) -> dict:
    actions = []
    for action in record.actions:
        item: dict[str, object] = {
            "kind": action.kind.value,
            "source_relation": action.source_relation,
        }
        if action.target_relation is not None:
            item["target_relation"] = action.target_relation
        actions.append(item)
    return {
        "document_id": record.document_id,
        "iteration": record.iteration,
        "oie_triplets": [list(t.as_tuple()) for t in record.oie_triplets],
        "definitions": dict(record.definitions),
        "canonical_triplets": [list(t.as_tuple()) for t in record.canonical_triplets],
        "actions": actions,
        "warnings": list(record.warnings),
    }


def record_from_dict(raw: Mapping, where: str) -> ExtractionRecord:
    try:
        actions = tuple(
            CanonicalizationAction(
                ActionKind(a["kind"]), a["source_relation"], a.get("target_relation")
            )
            for a in raw.get("actions", ())
        )
        return ExtractionRecord(
            document_id=str(raw["document_id"]),
            iteration=int(raw["iteration"]),
            oie_triplets=tuple(_triplet(t, where) for t in raw.get("oie_triplets", ())),
            definitions={str(k): str(v) for k, v in raw.get("definitions", {}).items()},
            canonical_triplets=tuple(
                _triplet(t, where) for t in raw.get("canonical_triplets", ())
            ),
            actions=actions,
            warnings=tuple(str(w) for w in raw.get("warnings", ())),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise InputError(f"{where}: bad results record: {exc}") from exc


def save_results(records: Sequence[ExtractionRecord], path: str | Path) -> None:
    lines = [json.dumps(record_to_dict(r), ensure_ascii=False) for r in records]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def load_results(path: str | Path) -> list[ExtractionRecord]:
    path = Path(path)
    return [
        record_from_dict(record, f"{path}:{line_no}")
        for line_no, record in _json_lines(path)
    ]


def report_to_dict(report: EvalReport) -> dict:
    return {
        "criteria": {
            name: {
                "precision": scores.precision,
                "recall": scores.recall,
                "f1": scores.f1,
            }
            for name, scores in report.criteria.items()
        },
        "schema_size": report.schema_size,
        "redundancy": report.redundancy,
        "avg_triplets_per_sentence": report.avg_triplets_per_sentence,
        "warnings": {k: report.warnings[k] for k in sorted(report.warnings)},
    }


def save_report(report: EvalReport, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(report_to_dict(report), ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8",
    )


def save_manifest(manifest: Mapping, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(manifest, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )
