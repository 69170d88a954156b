"""Chat-completion backends: a JSON-over-HTTP client and a deterministic replay store."""

from __future__ import annotations

import hashlib
import logging
import os
import threading
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import httpx

logger = logging.getLogger(__name__)

_ROLES = ("system", "user", "assistant")
_RETRY_STATUSES = frozenset({429, 500, 502, 503, 504})


class GatewayError(Exception):
    """Base class for backend failures."""


class TransportError(GatewayError):
    """HTTP transport failed after all retries."""


class ReplayMissError(GatewayError):
    """A replay run issued a request with no stored fixture. Fatal by design."""


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self) -> None:
        if self.role not in _ROLES:
            raise ValueError(f"unknown role: {self.role!r}")
        if self.role != "system" and not self.content:
            raise ValueError(f"{self.role} message must have content")


@dataclass(frozen=True)
class ChatRequest:
    """A chat completion call; temperature defaults to 0 so runs are reproducible."""

    messages: tuple[ChatMessage, ...]
    temperature: float = 0.0
    max_output_tokens: int = 1024
    model_tag: str = ""

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("request needs at least one message")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_output_tokens <= 0:
            raise ValueError("max_output_tokens must be positive")
        non_system = [m for m in self.messages if m.role != "system"]
        if non_system and non_system[0].role != "user":
            raise ValueError("first non-system message must come from the user")


def user_request(prompt: str, *, max_output_tokens: int = 1024) -> ChatRequest:
    """Wrap a rendered prompt as a single-user-message request."""
    return ChatRequest(
        messages=(ChatMessage("user", prompt),),
        max_output_tokens=max_output_tokens,
    )


@dataclass(frozen=True)
class CompletionResult:
    text: str
    truncated: bool = False


def request_digest(request: ChatRequest) -> str:
    """Stable key for a request: sha256 over the role-tagged message contents.

    Any change to the rendered prompt changes the digest, so stale replay
    fixtures fail loudly instead of silently matching.
    """
    payload = "\n".join(f"{m.role}:{m.content}" for m in request.messages)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class ChatBackend(Protocol):
    def complete(self, request: ChatRequest) -> CompletionResult: ...


@dataclass
class BackendStats:
    """Thread-safe request tallies, surfaced in the run manifest."""

    counters: Counter = field(default_factory=Counter)
    served_digests: set = field(default_factory=set)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def bump(self, key: str, n: int = 1) -> None:
        with self._lock:
            self.counters[key] += n

    def record_digest(self, digest: str) -> None:
        with self._lock:
            self.served_digests.add(digest)

    def snapshot(self) -> dict[str, int]:
        with self._lock:
            return dict(self.counters)

    def digests(self) -> list[str]:
        with self._lock:
            return sorted(self.served_digests)


@dataclass(frozen=True)
class HttpConfig:
    """Connection settings for a JSON chat-completion endpoint.

    The API key is read from the environment variable named by
    ``api_key_env`` and never stored in files.
    """

    endpoint: str
    model: str
    api_key_env: str = ""
    timeout_seconds: float = 60.0
    max_retries: int = 3
    backoff_base_seconds: float = 0.25
    max_in_flight: int = 4


class HttpChatBackend:
    """Speaks the common chat-completion wire protocol.

    Request body: ``{model, messages, temperature, max_tokens}``. The reply is
    read from the first choice's message content; a ``length`` finish reason
    marks the result truncated.
    """

    def __init__(self, config: HttpConfig, client: httpx.Client | None = None) -> None:
        self.config = config
        self.stats = BackendStats()
        self._client = client or httpx.Client(timeout=config.timeout_seconds)
        self._slots = threading.Semaphore(config.max_in_flight)

    def describe(self) -> str:
        return f"http:{self.config.endpoint}#{self.config.model}"

    def complete(self, request: ChatRequest) -> CompletionResult:
        body = {
            "model": request.model_tag or self.config.model,
            "messages": [{"role": m.role, "content": m.content} for m in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }
        data = _post_with_retries(
            self._client,
            self.config,
            self._slots,
            self.stats,
            body,
        )
        try:
            choice = data["choices"][0]
            text = choice["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"malformed completion response: {exc}") from exc
        truncated = choice.get("finish_reason") == "length"
        if truncated:
            self.stats.bump("truncated")
            logger.warning("completion stopped at the token limit")
        return CompletionResult(text=str(text), truncated=truncated)


def _post_with_retries(
    client: httpx.Client,
    config: HttpConfig,
    slots: threading.Semaphore,
    stats: BackendStats,
    body: dict,
) -> dict:
    headers = {"Content-Type": "application/json"}
    if config.api_key_env:
        key = os.environ.get(config.api_key_env)
        if not key:
            raise TransportError(f"environment variable {config.api_key_env} is not set")
        headers["Authorization"] = f"Bearer {key}"
    delay = config.backoff_base_seconds
    last_error = "exhausted retries"
    for attempt in range(config.max_retries + 1):
        if attempt:
            time.sleep(delay)
            delay *= 2
            stats.bump("retries")
        stats.bump("requests")
        try:
            with slots:
                response = client.post(config.endpoint, json=body, headers=headers)
        except httpx.HTTPError as exc:
            last_error = f"transport failure: {exc}"
            logger.warning("%s (attempt %d)", last_error, attempt + 1)
            continue
        if response.status_code in _RETRY_STATUSES:
            last_error = f"status {response.status_code}"
            logger.warning("retryable %s (attempt %d)", last_error, attempt + 1)
            continue
        if response.status_code >= 400:
            raise TransportError(f"status {response.status_code}: {response.text[:200]}")
        try:
            return response.json()
        except ValueError as exc:
            raise TransportError(f"non-JSON response body: {exc}") from exc
    raise TransportError(last_error)


class ReplayChatBackend:
    """Serves completions from ``<digest>.txt`` files in a fixture directory.

    A request whose digest has no fixture is an error, never a silent
    fallback: replay runs must be a pure function of inputs and fixtures.
    """

    def __init__(self, fixture_dir: str | Path) -> None:
        self.fixture_dir = Path(fixture_dir)
        self.stats = BackendStats()
        if not self.fixture_dir.is_dir():
            raise ReplayMissError(f"fixture directory not found: {self.fixture_dir}")

    def describe(self) -> str:
        return f"replay:{self.fixture_dir}"

    def complete(self, request: ChatRequest) -> CompletionResult:
        digest = request_digest(request)
        path = self.fixture_dir / f"{digest}.txt"
        if not path.is_file():
            raise ReplayMissError(
                f"unresolved replay request {digest} "
                f"(prompt starts: {request.messages[-1].content[:80]!r})"
            )
        self.stats.bump("requests")
        self.stats.record_digest(digest)
        return CompletionResult(text=path.read_text(encoding="utf-8"))


def complete(backend: ChatBackend, request: ChatRequest) -> CompletionResult:
    """Run one completion against whichever backend is configured."""
    return backend.complete(request)


def write_chat_fixture(fixture_dir: str | Path, prompt: str, response: str) -> str:
    """Store a response under the digest of a single-user-message prompt.

    Returns the digest. Intended for building replay fixture sets.
    """
    digest = request_digest(user_request(prompt))
    directory = Path(fixture_dir)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / f"{digest}.txt").write_text(response, encoding="utf-8")
    return digest


def describe_backend(backend: object) -> str:
    describe = getattr(backend, "describe", None)
    if callable(describe):
        return str(describe())
    return type(backend).__name__
