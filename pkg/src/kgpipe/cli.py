"""Command-line surface: run the pipeline, evaluate outputs, probe retrieval.

Exit codes: 0 success, 1 usage error, 2 input error, 3 backend failure.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from collections import Counter
from pathlib import Path
from typing import Sequence

from .canonicalize import (
    CanonConfig,
    CanonicalSchemaState,
    CanonMode,
    build_target_index,
    canonicalize_document,
)
from .define import define_relations
from .embedding import HttpEmbeddingBackend, ReplayEmbeddingBackend
from .evaluate import (
    EvalReport,
    MatchCriterion,
    evaluate_documents,
    redundancy_score,
    schema_stats,
)
from .fileio import (
    InputError,
    load_dataset,
    load_few_shot,
    load_results,
    load_schema,
    save_manifest,
    save_report,
    save_results,
    save_schema,
)
from .gateway import GatewayError, HttpChatBackend, HttpConfig, ReplayChatBackend, describe_backend
from .index import recall_at_k
from .model import ExtractionRecord, Schema
from .oie import OieConfig
from .pipeline import Backends, PipelineConfig, run_pipeline

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_BACKEND = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


def _add_backend_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--replay", metavar="DIR", help="replay fixtures directory")
    parser.add_argument("--llm-endpoint", help="chat completion endpoint URL")
    parser.add_argument("--llm-model", default="default", help="chat model name")
    parser.add_argument("--embed-endpoint", help="embedding endpoint URL")
    parser.add_argument("--embed-model", default="default", help="embedding model name")
    parser.add_argument(
        "--api-key-env",
        default="",
        help="environment variable holding the API key for HTTP backends",
    )
    parser.add_argument("--jobs", type=int, default=os.cpu_count() or 1)


def _chat_backend(args: argparse.Namespace):
    if args.replay:
        return ReplayChatBackend(args.replay)
    if not args.llm_endpoint:
        raise UsageError("either --replay or --llm-endpoint is required")
    return HttpChatBackend(
        HttpConfig(args.llm_endpoint, args.llm_model, api_key_env=args.api_key_env)
    )


def _embed_backend(args: argparse.Namespace):
    if args.replay:
        return ReplayEmbeddingBackend(args.replay)
    if not args.embed_endpoint:
        raise UsageError("either --replay or --embed-endpoint is required")
    return HttpEmbeddingBackend(
        HttpConfig(args.embed_endpoint, args.embed_model, api_key_env=args.api_key_env)
    )


def build_parser() -> _Parser:
    parser = _Parser(prog="kgpipe", description=__doc__)
    parser.add_argument("--config", metavar="FILE", help="key=value defaults file")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the extraction pipeline over a dataset")
    run.add_argument("--dataset", required=True)
    run.add_argument("--mode", choices=["target", "self"], default="target")
    run.add_argument("--schema", help="target schema file (target mode)")
    run.add_argument("--iterations", type=int, default=1, help="refinement rounds")
    run.add_argument("--few-shot", help="few-shot examples file (JSONL)")
    run.add_argument("--candidate-k", type=int, default=5)
    run.add_argument("--retrieval-k", type=int, default=10)
    run.add_argument("--combined", action="store_true", help="extract and define in one prompt")
    run.add_argument(
        "--no-exact-shortcut",
        action="store_true",
        help="always ask the MCQ, even for relations already in the schema",
    )
    run.add_argument("--out", required=True, metavar="DIR")
    _add_backend_flags(run)

    ev = sub.add_parser("evaluate", help="score results against reference triplets")
    ev.add_argument("--results", required=True)
    ev.add_argument("--references", required=True, help="dataset file with reference triplets")
    ev.add_argument("--criteria", choices=["all", "exact", "partial", "strict"], default="all")
    ev.add_argument("--schema", help="schema file, for size and redundancy metrics")
    ev.add_argument("--out", help="report file (JSON); metrics always print to stdout")
    _add_backend_flags(ev)

    re_cmd = sub.add_parser("retriever-eval", help="recall@k of schema retrieval on a dataset")
    re_cmd.add_argument("--dataset", required=True)
    re_cmd.add_argument("--schema", required=True)
    re_cmd.add_argument("--k", type=int, default=10)
    _add_backend_flags(re_cmd)

    canon = sub.add_parser(
        "canonicalize", help="define and canonicalize pre-extracted open triplets"
    )
    canon.add_argument("--input", required=True, help="dataset file whose triplets are open")
    canon.add_argument("--mode", choices=["target", "self"], default="target")
    canon.add_argument("--schema")
    canon.add_argument("--few-shot")
    canon.add_argument("--candidate-k", type=int, default=5)
    canon.add_argument("--no-exact-shortcut", action="store_true")
    canon.add_argument("--out", required=True, metavar="DIR")
    _add_backend_flags(canon)
    return parser


def _apply_config_file(parser: _Parser, argv: Sequence[str]) -> Sequence[str]:
    """Load key=value defaults from --config before the real parse."""
    probe = _Parser(add_help=False)
    probe.add_argument("--config")
    known, _ = probe.parse_known_args(argv)
    if not known.config:
        return argv
    path = Path(known.config)
    if not path.is_file():
        raise InputError(f"config file not found: {path}")
    defaults = {}
    for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InputError(f"{path}:{line_no}: expected key=value")
        key, _, value = line.partition("=")
        defaults[key.strip().replace("-", "_")] = _coerce(value.strip())
    parser.set_defaults(**defaults)
    return argv


def _coerce(value: str):
    if value.lower() in ("true", "false"):
        return value.lower() == "true"
    try:
        return int(value)
    except ValueError:
        return value


def _load_target_schema(args: argparse.Namespace) -> Schema | None:
    if args.mode == "target":
        if not args.schema:
            raise UsageError("target mode requires --schema")
        return load_schema(args.schema)
    if args.schema:
        schema = load_schema(args.schema)
        if len(schema) > 0:
            raise UsageError("self mode starts from an empty schema; omit --schema")
    return None


def _manifest(
    args: argparse.Namespace,
    config: dict,
    backends_desc: dict[str, str],
    warning_counts: Counter,
    fixture_digests: list[str],
) -> dict:
    # Replay runs must be byte-reproducible, so they carry no timestamp.
    timestamp = None if args.replay else time.strftime("%Y-%m-%dT%H:%M:%S%z")
    return {
        "config": config,
        "backends": backends_desc,
        "fixture_digests": fixture_digests,
        "timestamp": timestamp,
        "warnings": {k: warning_counts[k] for k in sorted(warning_counts)},
    }


def _collect_digests(*backends: object) -> list[str]:
    digests: set[str] = set()
    for backend in backends:
        stats = getattr(backend, "stats", None)
        if stats is not None:
            digests.update(stats.digests())
    return sorted(digests)


def _warning_counter(records) -> Counter:
    counts: Counter = Counter()
    for record in records:
        for warning in record.warnings:
            counts[warning.split(":")[0].strip()] += 1
    return counts


def _cmd_run(args: argparse.Namespace) -> int:
    documents = load_dataset(args.dataset)
    target_schema = _load_target_schema(args)
    few_shot = load_few_shot(args.few_shot) if args.few_shot else ()
    mode = CanonMode(args.mode)
    cfg = PipelineConfig(
        mode=mode,
        iterations=args.iterations,
        retrieval_k=args.retrieval_k,
        canon=CanonConfig(
            mode=mode,
            candidate_k=args.candidate_k,
            exact_match_shortcut=not args.no_exact_shortcut,
        ),
        oie=OieConfig(few_shot=few_shot, combined_mode=args.combined),
    )
    chat = _chat_backend(args)
    embedder = _embed_backend(args)
    backends = Backends(chat, embedder)

    records, final_schema = run_pipeline(
        documents, cfg, backends, target_schema, jobs=args.jobs
    )

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_results(records, out / "results.jsonl")
    save_schema(final_schema, out / "schema.json")
    config_snapshot = {
        "command": "run",
        "dataset": args.dataset,
        "mode": args.mode,
        "schema": args.schema,
        "iterations": args.iterations,
        "retrieval_k": args.retrieval_k,
        "candidate_k": args.candidate_k,
        "exact_match_shortcut": not args.no_exact_shortcut,
        "combined": args.combined,
        "few_shot": args.few_shot,
        "few_shot_count": len(few_shot),
        "replay": args.replay,
        "jobs": args.jobs,
    }
    desc = {"chat": describe_backend(chat), "embedding": describe_backend(embedder)}
    manifest = _manifest(
        args, config_snapshot, desc, _warning_counter(records), _collect_digests(chat, embedder)
    )
    save_manifest(manifest, out / "manifest.json")
    print(f"wrote {len(records)} records for {len(documents)} documents to {out}")
    return EXIT_OK


def _cmd_evaluate(args: argparse.Namespace) -> int:
    records = load_results(args.results)
    references = {d.id: d for d in load_dataset(args.references)}

    latest = {}
    for record in records:
        held = latest.get(record.document_id)
        if held is None or record.iteration > held.iteration:
            latest[record.document_id] = record

    warnings: Counter = Counter()
    pairs = []
    for doc_id, record in latest.items():
        reference = references.get(doc_id)
        if reference is None or reference.reference_triplets is None:
            warnings["document without references skipped"] += 1
            continue
        pairs.append((record.canonical_triplets, reference.reference_triplets))
    for doc_id in references:
        if doc_id not in latest:
            warnings["reference document without results skipped"] += 1
    if not pairs:
        raise InputError("no documents with both results and references")

    if args.criteria == "all":
        criteria = tuple(MatchCriterion)
    else:
        criteria = (MatchCriterion(args.criteria),)
    scores, score_warnings = evaluate_documents(pairs, criteria)
    warnings.update(score_warnings)

    schema_size = None
    redundancy = None
    avg = None
    if args.schema:
        schema = load_schema(args.schema)
        stats = schema_stats(schema, records)
        schema_size = int(stats["schema_size"])
        avg = stats["avg_triplets_per_sentence"]
        if args.replay or args.embed_endpoint:
            state = build_target_index(schema, _embed_backend(args))
            redundancy = redundancy_score(state.index)

    report = EvalReport(
        criteria=scores,
        schema_size=schema_size,
        redundancy=redundancy,
        avg_triplets_per_sentence=avg,
        warnings=dict(warnings),
    )
    for name, s in scores.items():
        print(
            f"{name}: precision={s.precision:.3f} recall={s.recall:.3f} f1={s.f1:.3f}"
        )
    if schema_size is not None:
        print(f"schema_size={schema_size}")
    if redundancy is not None:
        print(f"redundancy={redundancy:.3f}")
    if avg is not None:
        print(f"avg_triplets_per_sentence={avg:.3f}")
    if args.out:
        save_report(report, args.out)
    return EXIT_OK


def _cmd_retriever_eval(args: argparse.Namespace) -> int:
    documents = load_dataset(args.dataset)
    schema = load_schema(args.schema)
    pairs = []
    for doc in documents:
        if not doc.reference_triplets:
            continue
        gold = sorted({t.relation for t in doc.reference_triplets})
        pairs.append((doc.text, gold))
    if not pairs:
        raise InputError("dataset has no documents with reference triplets")
    embedder = _embed_backend(args)
    state = build_target_index(schema, embedder)
    try:
        score = recall_at_k(pairs, state.index, embedder, args.k)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    print(f"recall@{args.k}={score:.3f} over {len(pairs)} documents")
    return EXIT_OK


def _cmd_canonicalize(args: argparse.Namespace) -> int:
    documents = load_dataset(args.input)
    missing = [d.id for d in documents if not d.reference_triplets]
    if missing:
        raise InputError(f"input documents lack open triplets: {missing[:5]}")
    target_schema = _load_target_schema(args)
    few_shot = load_few_shot(args.few_shot) if args.few_shot else ()
    canon_cfg = CanonConfig(
        mode=CanonMode(args.mode),
        candidate_k=args.candidate_k,
        exact_match_shortcut=not args.no_exact_shortcut,
    )
    chat = _chat_backend(args)
    embedder = _embed_backend(args)
    if canon_cfg.mode is CanonMode.TARGET:
        state = build_target_index(target_schema, embedder)
    else:
        state = CanonicalSchemaState.empty()

    records = []
    for doc in documents:
        triplets = list(doc.reference_triplets or ())
        definitions, warnings = define_relations(doc.text, triplets, chat, few_shot)
        canonical, actions = canonicalize_document(
            triplets, definitions, state, canon_cfg, doc.text, chat, embedder
        )
        records.append(
            ExtractionRecord(
                document_id=doc.id,
                iteration=0,
                oie_triplets=tuple(triplets),
                definitions=definitions,
                canonical_triplets=tuple(canonical),
                actions=tuple(actions),
                warnings=tuple(warnings),
            )
        )

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_results(records, out / "results.jsonl")
    save_schema(state.schema, out / "schema.json")
    config_snapshot = {
        "command": "canonicalize",
        "input": args.input,
        "mode": args.mode,
        "schema": args.schema,
        "candidate_k": args.candidate_k,
        "exact_match_shortcut": not args.no_exact_shortcut,
        "few_shot": args.few_shot,
        "replay": args.replay,
    }
    desc = {"chat": describe_backend(chat), "embedding": describe_backend(embedder)}
    manifest = _manifest(
        args, config_snapshot, desc, _warning_counter(records), _collect_digests(chat, embedder)
    )
    save_manifest(manifest, out / "manifest.json")
    print(f"canonicalized {len(documents)} documents to {out}")
    return EXIT_OK


_COMMANDS = {
    "run": _cmd_run,
    "evaluate": _cmd_evaluate,
    "retriever-eval": _cmd_retriever_eval,
    "canonicalize": _cmd_canonicalize,
}


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = list(_apply_config_file(parser, argv))
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except GatewayError as exc:
        print(f"backend failure: {exc}", file=sys.stderr)
        return EXIT_BACKEND


if __name__ == "__main__":
    sys.exit(main())
