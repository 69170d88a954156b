"""Embedding backends (HTTP and replay) and the retrieval instruction wrapper."""

from __future__ import annotations

import hashlib
import logging
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import httpx
import numpy as np

from .gateway import BackendStats, HttpConfig, ReplayMissError, TransportError, _post_with_retries

logger = logging.getLogger(__name__)

RETRIEVAL_INSTRUCTION_TEMPLATE = (
    "Instruct: retrieve relations that are present in the given text \n Query: {t}"
)


@dataclass(frozen=True)
class RetrievalInstruction:
    """Instruction wrapper applied to query texts before embedding.

    The schema side of a relevance index is embedded without it; only the
    query text gets wrapped.
    """

    template: str = RETRIEVAL_INSTRUCTION_TEMPLATE

    def __post_init__(self) -> None:
        if self.template.count("{t}") != 1:
            raise ValueError("instruction template must contain {t} exactly once")

    def apply(self, text: str) -> str:
        return self.template.replace("{t}", text)


class EmbeddingBackend(Protocol):
    def embed_texts(self, texts: Sequence[str]) -> list[np.ndarray]: ...


def text_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def normalize(vector: np.ndarray) -> np.ndarray:
    """Scale to unit L2 norm; zero vectors are rejected."""
    arr = np.asarray(vector, dtype=np.float64)
    norm = float(np.linalg.norm(arr))
    if norm == 0.0:
        raise ValueError("cannot normalize a zero vector")
    return arr / norm


def embed(
    backend: EmbeddingBackend,
    texts: Sequence[str],
    instruction: RetrievalInstruction | None = None,
) -> list[np.ndarray]:
    """Embed texts in order, unit-normalized, optionally instruction-wrapped.

    Raises:
        ValueError: empty input or inconsistent dimensions across the batch.
    """
    if not texts:
        raise ValueError("texts must be non-empty")
    wrapped = [instruction.apply(t) for t in texts] if instruction else list(texts)
    raw = backend.embed_texts(wrapped)
    if len(raw) != len(wrapped):
        raise ValueError(f"backend returned {len(raw)} vectors for {len(wrapped)} texts")
    vectors = [normalize(v) for v in raw]
    dims = {v.shape[0] for v in vectors}
    if len(dims) != 1:
        raise ValueError(f"inconsistent embedding dimensions: {sorted(dims)}")
    return vectors


class HttpEmbeddingBackend:
    """Client for a JSON embedding endpoint: ``{model, input: [...]}`` in,
    vectors in input order out."""

    def __init__(self, config: HttpConfig, client: httpx.Client | None = None) -> None:
        self.config = config
        self.stats = BackendStats()
        self._client = client or httpx.Client(timeout=config.timeout_seconds)
        self._slots = threading.Semaphore(config.max_in_flight)

    def describe(self) -> str:
        return f"http:{self.config.endpoint}#{self.config.model}"

    def embed_texts(self, texts: Sequence[str]) -> list[np.ndarray]:
        body = {"model": self.config.model, "input": list(texts)}
        data = _post_with_retries(self._client, self.config, self._slots, self.stats, body)
        rows = _extract_rows(data)
        if rows is None:
            raise TransportError("unrecognized embedding response shape")
        return [np.asarray(row, dtype=np.float64) for row in rows]


def _extract_rows(data: object) -> list | None:
    # Bare list of arrays, {"embeddings": [...]}, or {"data": [{"embedding": ...}]}.
    if isinstance(data, list):
        return data
    if isinstance(data, dict):
        if isinstance(data.get("embeddings"), list):
            return data["embeddings"]
        entries = data.get("data")
        if isinstance(entries, list):
            try:
                return [entry["embedding"] for entry in entries]
            except (KeyError, TypeError):
                return None
    return None


class ReplayEmbeddingBackend:
    """Serves vectors from ``<digest>.vec`` files of newline-separated floats."""

    def __init__(self, fixture_dir: str | Path) -> None:
        self.fixture_dir = Path(fixture_dir)
        self.stats = BackendStats()
        if not self.fixture_dir.is_dir():
            raise ReplayMissError(f"fixture directory not found: {self.fixture_dir}")

    def describe(self) -> str:
        return f"replay:{self.fixture_dir}"

    def embed_texts(self, texts: Sequence[str]) -> list[np.ndarray]:
        vectors = []
        for text in texts:
            digest = text_digest(text)
            path = self.fixture_dir / f"{digest}.vec"
            if not path.is_file():
                raise ReplayMissError(
                    f"unresolved replay embedding {digest} (text starts: {text[:80]!r})"
                )
            values = [float(line) for line in path.read_text().split()]
            vectors.append(np.asarray(values, dtype=np.float64))
            self.stats.bump("requests")
            self.stats.record_digest(digest)
        return vectors


def write_embedding_fixture(fixture_dir: str | Path, text: str, vector: Sequence[float]) -> str:
    """Store a vector under the digest of the exact text to be embedded."""
    digest = text_digest(text)
    directory = Path(fixture_dir)
    directory.mkdir(parents=True, exist_ok=True)
    content = "\n".join(repr(float(v)) for v in vector) + "\n"
    (directory / f"{digest}.vec").write_text(content, encoding="utf-8")
    return digest
