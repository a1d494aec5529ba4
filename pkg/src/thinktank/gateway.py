"""Uniform access to a locally served LLM, plus a scripted stand-in.

Two backends implement the same surface:

* ``OllamaGateway`` speaks the Ollama-compatible wire protocol against a
  local server (chat via ``POST /api/chat``, embeddings via
  ``POST /api/embeddings``).
* ``ScriptedGateway`` replays canned responses matched on request tags and
  derives embeddings from a documented hash rule, so engine tests are exact
  and need no model.

Both are thread-safe; neither holds mutable state beyond the HTTP
connection pool and the scripted request capture list.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import httpx

from .errors import (
    ConfigurationError,
    GatewayError,
    GatewayTimeout,
    ProtocolError,
    ScriptError,
    ValidationError,
)

logger = logging.getLogger(__name__)

DEFAULT_BASE_URL = "http://localhost:11434"
BASE_URL_ENV = "THINKTANK_LLM_URL"

CHAT_ROLES = ("system", "user", "assistant")


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str


@dataclass(frozen=True)
class ChatRequest:
    """One chat completion request.

    ``tags`` identify the request for scripted matching and test capture
    (typically phase, round, speaker); they never go over the wire.
    """

    model: str
    messages: tuple[ChatMessage, ...]
    temperature: float = 0.7
    max_output_chars: int = 20000
    timeout_s: float = 120.0
    tags: dict = field(default_factory=dict)

    def validate(self) -> None:
        if not self.messages:
            raise ValidationError("chat request needs at least one message")
        for msg in self.messages:
            if msg.role not in CHAT_ROLES:
                raise ValidationError(f"unknown chat role {msg.role!r}")
            if not msg.content:
                raise ValidationError("chat message content must be non-empty")
        if not (0.0 <= self.temperature <= 2.0):
            raise ValidationError("temperature must lie in [0, 2]")
        if self.max_output_chars < 1:
            raise ValidationError("max_output_chars must be positive")
        if self.timeout_s <= 0:
            raise ValidationError("timeout must be positive")

    def text(self) -> str:
        """All message contents joined; used by tests to assert containment."""
        return "\n".join(m.content for m in self.messages)


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]
    dim: int

    def __post_init__(self):
        if len(self.values) != self.dim:
            raise ValidationError(f"embedding has {len(self.values)} values, dim says {self.dim}")
        if any(not math.isfinite(v) for v in self.values):
            raise ValidationError("embedding contains non-finite values")


@dataclass
class BackendStatus:
    name: str
    models: list[str]
    reachable: bool
    warning: str = ""


def _validate_embed_input(texts: list[str]) -> None:
    if not texts:
        raise ValidationError("embed needs at least one text")
    for t in texts:
        if not t:
            raise ValidationError("cannot embed an empty text")


def hash_embedding(text: str, dim: int) -> list[float]:
    """Deterministic pseudo-embedding used by the scripted backend.

    Rule: ``seed = sha256(utf-8 bytes of text)``; block ``j`` (j = 0, 1, ...)
    is ``sha256(seed || uint32_be(j))``; the concatenated blocks are read as
    consecutive big-endian uint32 words, and word ``w`` maps to
    ``w / 2**31 - 1.0`` (a value in [-1, 1)). The first ``dim`` words form
    the vector.
    """
    if dim < 1:
        raise ValidationError("embedding dim must be positive")
    seed = hashlib.sha256(text.encode("utf-8")).digest()
    values: list[float] = []
    block_index = 0
    while len(values) < dim:
        block = hashlib.sha256(seed + block_index.to_bytes(4, "big")).digest()
        for offset in range(0, len(block), 4):
            if len(values) >= dim:
                break
            word = int.from_bytes(block[offset : offset + 4], "big")
            values.append(word / 2**31 - 1.0)
        block_index += 1
    return values


class Gateway:
    """Shared surface of every backend."""

    def chat(self, request: ChatRequest) -> str:
        raise NotImplementedError

    def embed(self, texts: list[str]) -> list[EmbeddingVector]:
        raise NotImplementedError

    def health_check(self) -> BackendStatus:
        raise NotImplementedError


class ScriptedGateway(Gateway):
    """Replays canned responses; the engine's determinism rests on this.

    The script is an ordered list of ``(match, response)`` rules. A rule
    matches when every key/value in ``match`` equals the request tag of the
    same key (compared as strings); the first match wins and an unmatched
    request is a ScriptError. Every chat request is captured in
    ``self.requests`` so tests can assert on assembled prompts.
    """

    def __init__(self, rules: list, embedding_dim: int = 32):
        self.rules: list[tuple[dict, str]] = []
        for rule in rules:
            if isinstance(rule, dict):
                self.rules.append((dict(rule["match"]), rule["response"]))
            else:
                match, response = rule
                self.rules.append((dict(match), response))
        if embedding_dim < 1:
            raise ValidationError("embedding dim must be positive")
        self.embedding_dim = embedding_dim
        self.requests: list[ChatRequest] = []

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedGateway":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(data["responses"], embedding_dim=int(data.get("embedding_dim", 32)))

    def chat(self, request: ChatRequest) -> str:
        request.validate()
        self.requests.append(request)
        for match, response in self.rules:
            if all(str(request.tags.get(k)) == str(v) for k, v in match.items()):
                return response[: request.max_output_chars]
        raise ScriptError(f"no scripted response matches tags {request.tags!r}")

    def embed(self, texts: list[str]) -> list[EmbeddingVector]:
        _validate_embed_input(texts)
        return [
            EmbeddingVector(tuple(hash_embedding(t, self.embedding_dim)), self.embedding_dim)
            for t in texts
        ]

    def health_check(self) -> BackendStatus:
        return BackendStatus(name="scripted", models=["scripted"], reachable=True)


class OllamaGateway(Gateway):
    """HTTP client for an Ollama-compatible local server.

    Transient transport failures are retried with exponential backoff
    (local servers drop connections while loading models); timeouts and
    protocol-level failures surface immediately.
    """

    def __init__(
        self,
        base_url: str | None = None,
        *,
        model: str = "llama3.1",
        embed_model: str | None = None,
        retries: int = 3,
        backoff_s: tuple = (0.25, 1.0, 4.0),
        transport: httpx.BaseTransport | None = None,
        sleep=time.sleep,
    ):
        self.base_url = (base_url or os.environ.get(BASE_URL_ENV) or DEFAULT_BASE_URL).rstrip("/")
        self.model = model
        self.embed_model = embed_model or model
        self.retries = max(1, retries)
        self.backoff_s = backoff_s
        self._sleep = sleep
        self._client = httpx.Client(base_url=self.base_url, transport=transport, timeout=None)

    def close(self) -> None:
        self._client.close()

    def _post(self, path: str, payload: dict, timeout_s: float) -> dict:
        last_exc: Exception | None = None
        for attempt in range(self.retries):
            try:
                response = self._client.post(path, json=payload, timeout=timeout_s)
            except httpx.TimeoutException as exc:
                raise GatewayTimeout(f"backend timed out after {timeout_s}s on {path}") from exc
            except httpx.TransportError as exc:
                last_exc = exc
                if attempt + 1 < self.retries:
                    delay = self.backoff_s[min(attempt, len(self.backoff_s) - 1)]
                    logger.warning("transport error on %s (attempt %d): %s", path, attempt + 1, exc)
                    self._sleep(delay)
                continue
            if response.status_code == 404:
                raise ConfigurationError(self._error_detail(response, "model not found"))
            if response.status_code >= 500:
                last_exc = ProtocolError(f"server error {response.status_code} on {path}")
                if attempt + 1 < self.retries:
                    delay = self.backoff_s[min(attempt, len(self.backoff_s) - 1)]
                    self._sleep(delay)
                continue
            if response.status_code >= 400:
                raise ProtocolError(self._error_detail(response, f"request rejected ({response.status_code})"))
            try:
                return response.json()
            except ValueError as exc:
                raise ProtocolError(f"backend returned non-JSON body on {path}") from exc
        raise GatewayError(f"backend unreachable after {self.retries} attempts: {last_exc}")

    @staticmethod
    def _error_detail(response: httpx.Response, fallback: str) -> str:
        try:
            return str(response.json().get("error", fallback))
        except ValueError:
            return fallback

    def chat(self, request: ChatRequest) -> str:
        request.validate()
        payload = {
            "model": request.model or self.model,
            "messages": [{"role": m.role, "content": m.content} for m in request.messages],
            "stream": False,
            "options": {"temperature": request.temperature},
        }
        data = self._post("/api/chat", payload, request.timeout_s)
        try:
            content = data["message"]["content"]
        except (KeyError, TypeError) as exc:
            raise ProtocolError(f"malformed chat response: {json.dumps(data)[:200]}") from exc
        if not isinstance(content, str) or not content:
            raise ProtocolError("backend returned an empty completion")
        return content[: request.max_output_chars]

    def embed(self, texts: list[str], timeout_s: float = 120.0) -> list[EmbeddingVector]:
        _validate_embed_input(texts)
        vectors: list[EmbeddingVector] = []
        for text in texts:
            data = self._post("/api/embeddings", {"model": self.embed_model, "prompt": text}, timeout_s)
            values = data.get("embedding")
            if not isinstance(values, list) or not values:
                raise ProtocolError("malformed embedding response")
            try:
                vec = EmbeddingVector(tuple(float(v) for v in values), len(values))
            except (TypeError, ValueError) as exc:
                raise ProtocolError("embedding contains non-numeric values") from exc
            vectors.append(vec)
        dims = {v.dim for v in vectors}
        if len(dims) > 1:
            raise ProtocolError(f"backend returned inconsistent embedding dims: {sorted(dims)}")
        return vectors

    def health_check(self) -> BackendStatus:
        try:
            response = self._client.get("/api/tags", timeout=3.0)
            response.raise_for_status()
            payload = response.json()
            models = [m.get("name", "") for m in payload.get("models", [])]
        except Exception as exc:
            return BackendStatus(name="ollama", models=[], reachable=False, warning=str(exc))
        warning = ""
        if self.model and not any(name.split(":")[0] == self.model.split(":")[0] for name in models):
            warning = f"configured model {self.model!r} not in server model list"
        return BackendStatus(name="ollama", models=models, reachable=True, warning=warning)
