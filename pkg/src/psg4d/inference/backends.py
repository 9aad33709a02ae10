"""Pluggable text-generation backends: deterministic mock and HTTP client.

The wire protocol is a single POST to {endpoint}/generate with a JSON body
{"prompt", "max_tokens", "temperature", "stop"} answered by {"text",
"finish_reason"}. Transport failures and 5xx responses are retried with
exponential backoff; 4xx responses are not.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from typing import Protocol

import httpx

__all__ = [
    "BackendRequest",
    "BackendResponse",
    "Backend",
    "BackendTransportError",
    "ScriptExhaustedError",
    "MockBackend",
    "HttpBackend",
]


@dataclass(frozen=True)
class BackendRequest:
    prompt: str
    max_tokens: int = 1024
    temperature: float = 0.0
    stop: tuple[str, ...] = ()

    def __post_init__(self):
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")


@dataclass(frozen=True)
class BackendResponse:
    text: str
    finish_reason: str = "stop"


class Backend(Protocol):
    def generate(self, request: BackendRequest) -> BackendResponse: ...


class BackendTransportError(RuntimeError):
    """The backend could not be reached or kept failing after retries."""


class ScriptExhaustedError(BackendTransportError):
    """A mock backend ran out of canned responses."""


class MockBackend:
    """Replays a fixed script of responses, one per request, in order.

    Thread-safe; concurrent callers are serialized so replay order stays
    deterministic.
    """

    def __init__(self, script):
        self._script = list(script)
        self._cursor = 0
        self._lock = threading.Lock()
        self.requests: list[BackendRequest] = []

    def generate(self, request: BackendRequest) -> BackendResponse:
        with self._lock:
            self.requests.append(request)
            if self._cursor >= len(self._script):
                raise ScriptExhaustedError(
                    f"mock script exhausted after {len(self._script)} responses"
                )
            text = self._script[self._cursor]
            self._cursor += 1
        return BackendResponse(text=text, finish_reason="stop")


@dataclass
class HttpBackend:
    """JSON-over-HTTP client for a remote generation service."""

    endpoint: str
    token: str | None = None
    timeout: float = 30.0
    retries: int = 3
    backoff: float = 0.5
    _client: httpx.Client = field(default=None, repr=False)

    def __post_init__(self):
        self.endpoint = self.endpoint.rstrip("/")
        if self._client is None:
            self._client = httpx.Client(timeout=self.timeout)

    def _headers(self) -> dict[str, str]:
        headers = {"content-type": "application/json"}
        if self.token:
            headers["authorization"] = f"Bearer {self.token}"
        return headers

    def generate(self, request: BackendRequest) -> BackendResponse:
        payload = {
            "prompt": request.prompt,
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
            "stop": list(request.stop),
        }
        url = f"{self.endpoint}/generate"
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                response = self._client.post(url, json=payload, headers=self._headers())
            except httpx.HTTPError as exc:
                last_error = exc
                continue
            if response.status_code >= 500:
                last_error = BackendTransportError(f"server returned {response.status_code}")
                continue
            if response.status_code >= 400:
                raise BackendTransportError(
                    f"request rejected with status {response.status_code}: {response.text[:200]}"
                )
            body = response.json()
            return BackendResponse(
                text=str(body.get("text", "")),
                finish_reason=str(body.get("finish_reason", "stop")),
            )
        raise BackendTransportError(
            f"backend unreachable after {self.retries + 1} attempts: {last_error}"
        )

    def close(self):
        self._client.close()
