"""Chat-completion backends: an OpenAI-compatible HTTP client and test mocks.

Retries, backoff and the concurrency cap live in :class:`ChatGateway`; a
backend only performs one attempt and classifies its failure as transient,
authentication or malformed.
"""

from __future__ import annotations

import base64
import logging
import os
import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Protocol, Sequence
from urllib.parse import urlparse

from .core import ActivityLabel
from .errors import (
    AuthenticationError,
    GatewayError,
    MalformedResponseError,
    ParameterError,
    RetriesExhaustedError,
)
from .prompting import PromptBundle, parse_answer

log = logging.getLogger(__name__)

API_KEY_ENV = "CSI_SENSE_API_KEY"


class TransientBackendError(GatewayError):
    """A failure worth retrying: connection problem, timeout, 429 or 5xx."""


@dataclass(frozen=True)
class BackendConfig:
    base_url: str
    model_name: str
    api_key: str = field(default="", repr=False)
    timeout: float = 60.0
    max_retries: int = 3
    temperature: float = 0.0
    max_concurrency: int = 4
    backoff_base: float = 0.5
    backoff_factor: float = 2.0
    backoff_jitter: float = 0.2

    def __post_init__(self):
        parsed = urlparse(self.base_url)
        if not (parsed.scheme and parsed.netloc):
            raise ParameterError(f"base_url must be absolute, got {self.base_url!r}")
        if not self.timeout > 0:
            raise ParameterError("timeout must be > 0")
        if self.max_retries < 0:
            raise ParameterError("max_retries must be >= 0")
        if not self.temperature >= 0:
            raise ParameterError("temperature must be >= 0")
        if self.max_concurrency < 1:
            raise ParameterError("max_concurrency must be >= 1")

    @classmethod
    def from_env(cls, base_url: str, model_name: str, **kwargs) -> BackendConfig:
        return cls(base_url, model_name, api_key=os.environ.get(API_KEY_ENV, ""), **kwargs)

    def backoff_delay(self, retry: int, rng: random.Random | None = None) -> float:
        """Sleep before retry number ``retry`` (1-based)."""
        delay = self.backoff_base * self.backoff_factor ** (retry - 1)
        jitter = (rng or random).uniform(-self.backoff_jitter, self.backoff_jitter)
        return max(0.0, delay * (1.0 + jitter))


@dataclass(frozen=True)
class ChatMessage:
    role: str
    text: str
    image_png: bytes | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.role not in ("system", "user"):
            raise ParameterError(f"unsupported role {self.role!r}")
        if self.image_png is not None and self.role != "user":
            raise ParameterError("images can only be attached to user messages")


@dataclass(frozen=True)
class ChatRequest:
    messages: tuple[ChatMessage, ...]

    def __post_init__(self):
        object.__setattr__(self, "messages", tuple(self.messages))
        if not any(m.role == "user" for m in self.messages):
            raise ParameterError("a chat request needs at least one user message")

    @classmethod
    def from_bundle(cls, bundle: PromptBundle) -> ChatRequest:
        image = bundle.image.png_bytes if bundle.image is not None else None
        return cls((ChatMessage("user", bundle.text, image),))

    @property
    def user_text(self) -> str:
        return "\n".join(m.text for m in self.messages if m.role == "user")


@dataclass(frozen=True)
class ChatResponse:
    text: str
    usage: dict | None = None


class ChatBackend(Protocol):
    def send(self, request: ChatRequest, config: BackendConfig) -> ChatResponse: ...


# ---------------------------------------------------------------------------
# HTTP backend


def request_payload(request: ChatRequest, config: BackendConfig) -> dict:
    """JSON body for ``POST {base_url}/chat/completions``."""
    messages = []
    for m in request.messages:
        if m.image_png is None:
            messages.append({"role": m.role, "content": m.text})
        else:
            url = "data:image/png;base64," + base64.b64encode(m.image_png).decode("ascii")
            messages.append({
                "role": m.role,
                "content": [
                    {"type": "text", "text": m.text},
                    {"type": "image_url", "image_url": {"url": url}},
                ],
            })
    return {"model": config.model_name, "messages": messages, "temperature": config.temperature}


class HttpChatBackend:
    """OpenAI-compatible chat completions over HTTP (httpx)."""

    def __init__(self, client=None):
        import httpx

        self._httpx = httpx
        self._client = client

    def send(self, request: ChatRequest, config: BackendConfig) -> ChatResponse:
        httpx = self._httpx
        url = config.base_url.rstrip("/") + "/chat/completions"
        headers = {"Content-Type": "application/json"}
        if config.api_key:
            headers["Authorization"] = f"Bearer {config.api_key}"
        client = self._client or httpx.Client()
        try:
            resp = client.post(url, json=request_payload(request, config), headers=headers,
                               timeout=config.timeout)
        except httpx.TimeoutException:
            raise TransientBackendError(f"request timed out after {config.timeout}s") from None
        except httpx.TransportError as exc:
            raise TransientBackendError(f"transport error: {type(exc).__name__}") from None
        finally:
            if self._client is None:
                client.close()

        if resp.status_code in (401, 403):
            raise AuthenticationError(f"backend rejected credentials (HTTP {resp.status_code})")
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransientBackendError(f"HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise GatewayError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            body = resp.json()
            text = body["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError):
            raise MalformedResponseError("response is not a chat completion") from None
        if not isinstance(text, str):
            raise MalformedResponseError("completion content is not text")
        return ChatResponse(text, body.get("usage"))


# ---------------------------------------------------------------------------
# Mocks


class MockChatBackend:
    """Scripted backend for offline runs.

    ``script`` is either a callable ``request -> str`` or a sequence whose
    items are replayed in order (the last one repeats).  An item that is an
    exception instance is raised instead of answered.
    """

    def __init__(self, script: Callable[[ChatRequest], str] | Sequence | str):
        if isinstance(script, str):
            script = [script]
        self._script = script
        self._lock = threading.Lock()
        self.requests: list[ChatRequest] = []

    @property
    def calls(self) -> int:
        return len(self.requests)

    def send(self, request: ChatRequest, config: BackendConfig) -> ChatResponse:
        with self._lock:
            self.requests.append(request)
            n = len(self.requests)
        if callable(self._script):
            item = self._script(request)
        else:
            item = self._script[min(n, len(self._script)) - 1]
        if isinstance(item, BaseException):
            raise item
        return ChatResponse(str(item))


def always_failing(status: int = 500) -> MockChatBackend:
    return MockChatBackend([TransientBackendError(f"HTTP {status}")])


# ---------------------------------------------------------------------------
# Gateway


class ChatGateway:
    """Retrying, concurrency-capped access to a chat backend."""

    def __init__(self, config: BackendConfig, backend: ChatBackend | None = None,
                 sleep: Callable[[float], None] = time.sleep, seed: int | None = None):
        self.config = config
        self.backend = backend if backend is not None else HttpChatBackend()
        self._sleep = sleep
        self._rng = random.Random(seed)
        self._slots = threading.BoundedSemaphore(config.max_concurrency)

    def complete(self, request: ChatRequest) -> ChatResponse:
        attempts = self.config.max_retries + 1
        last = None
        for attempt in range(1, attempts + 1):
            try:
                with self._slots:
                    return self.backend.send(request, self.config)
            except TransientBackendError as exc:
                last = exc
                log.warning("chat attempt %d/%d failed: %s", attempt, attempts, exc)
                if attempt < attempts:
                    self._sleep(self.config.backoff_delay(attempt, self._rng))
        raise RetriesExhaustedError(f"gave up after {attempts} attempts: {last}", attempts)

    def classify(self, bundle: PromptBundle) -> tuple[ActivityLabel, str]:
        """Ask the model and parse its answer; returns ``(label, raw_text)``."""
        response = self.complete(ChatRequest.from_bundle(bundle))
        return parse_answer(response.text), response.text

    def map(self, fn: Callable, items: Iterable) -> list:
        """Apply ``fn`` to every item with at most ``max_concurrency`` in flight."""
        items = list(items)
        if self.config.max_concurrency == 1 or len(items) <= 1:
            return [fn(item) for item in items]
        with ThreadPoolExecutor(max_workers=self.config.max_concurrency) as pool:
            return list(pool.map(fn, items))


def complete(config: BackendConfig, request: ChatRequest,
             backend: ChatBackend | None = None, **kwargs) -> ChatResponse:
    return ChatGateway(config, backend, **kwargs).complete(request)


def llm_classify(config: BackendConfig, bundle: PromptBundle,
                 backend: ChatBackend | None = None, **kwargs) -> tuple[ActivityLabel, str]:
    return ChatGateway(config, backend, **kwargs).classify(bundle)
