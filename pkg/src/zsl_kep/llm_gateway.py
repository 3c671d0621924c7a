"""Chat-completion access with deterministic generation settings.

Two backends share one interface: an OpenAI-compatible HTTP endpoint and a
scripted mock for offline runs and tests. The gateway in front of them retries
rate limits with exponential backoff but always surfaces context overflows —
recovering from those (by shrinking the prompt) is the pipeline's job, and the
two failure kinds must stay distinguishable for that to work.
"""

import json
import os
import threading
import time
from collections import defaultdict
from dataclasses import dataclass

import requests

from .errors import MalformedInput


class GatewayError(Exception):
    kind = "transport"

    def __init__(self, detail: str = ""):
        super().__init__(detail)
        self.detail = detail


class ContextOverflow(GatewayError):
    kind = "context_overflow"


class RateLimited(GatewayError):
    kind = "rate_limited"


class TransportFailure(GatewayError):
    kind = "transport"


class MalformedReply(GatewayError):
    kind = "malformed"


_SCRIPTED_ERRORS = {
    "context_overflow": ContextOverflow,
    "rate_limited": RateLimited,
    "transport": TransportFailure,
    "malformed": MalformedReply,
}

# body fragments that mean the request was too long, not over quota
_OVERFLOW_MARKERS = (
    "context length",
    "context_length",
    "maximum context",
    "too many tokens",
    "input length",
    "reduce the length",
    "reduce your message",
    "request too large",
    "payload too large",
)

API_KEY_ENV = "ZSLKEP_API_KEY"


@dataclass
class ChatRequest:
    system_message: str
    user_message: str
    temperature: float = 0.0
    top_p: float = 0.8
    max_new_tokens: int = 512

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must be in (0, 1]")
        if self.max_new_tokens <= 0:
            raise ValueError("max_new_tokens must be positive")


@dataclass
class ChatResponse:
    text: str
    finish_reason: str = "stop"  # stop | length | error


class MockBackend:
    """Replays scripted responses per claim, in call order.

    Scripts map claim id -> list of entries; a plain list is treated as
    indexed by claim id. Each entry is either a response string or an object
    like ``{"error": "context_overflow", "detail": "..."}`` for fault
    injection. Every request is recorded for prompt-capture tests.
    """

    def __init__(self, scripts):
        if isinstance(scripts, list):
            scripts = {i: entries for i, entries in enumerate(scripts)}
        for key, entries in scripts.items():
            if not isinstance(entries, list):
                raise MalformedReply(f"script for claim {key} must be a list of entries")
        self._scripts = {int(k): list(v) for k, v in scripts.items()}
        self._cursor: dict[int, int] = defaultdict(int)
        self._lock = threading.Lock()
        self.requests: list[tuple[int, ChatRequest]] = []

    @classmethod
    def from_file(cls, path) -> "MockBackend":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                scripts = json.load(fh)
            except json.JSONDecodeError as exc:
                raise MalformedInput(f"{path}: not valid JSON ({exc})") from exc
        if not isinstance(scripts, (list, dict)):
            raise MalformedInput(f"{path}: script must be an array or object")
        return cls(scripts)

    def calls_for(self, claim_id: int) -> list[ChatRequest]:
        with self._lock:
            return [req for cid, req in self.requests if cid == claim_id]

    def send(self, request: ChatRequest, claim_id: "int | None" = None) -> ChatResponse:
        if claim_id is None:
            raise MalformedReply("mock backend needs a claim id to pick its script")
        key = int(claim_id)
        with self._lock:
            self.requests.append((key, request))
            entries = self._scripts.get(key)
            if entries is None:
                raise MalformedReply(f"no script for claim {key}")
            cursor = self._cursor[key]
            if cursor >= len(entries):
                raise MalformedReply(f"script for claim {key} exhausted after {cursor} calls")
            self._cursor[key] = cursor + 1
            entry = entries[cursor]
        if isinstance(entry, str):
            return ChatResponse(text=entry, finish_reason="stop")
        if isinstance(entry, dict):
            if "error" in entry:
                exc = _SCRIPTED_ERRORS.get(entry["error"])
                if exc is None:
                    raise MalformedReply(f"unknown scripted error kind {entry['error']!r}")
                raise exc(entry.get("detail", "scripted failure"))
            if "text" in entry:
                return ChatResponse(text=entry["text"],
                                    finish_reason=entry.get("finish_reason", "stop"))
        raise MalformedReply(f"unusable script entry for claim {key}: {entry!r}")


class HttpBackend:
    """POSTs to ``{base_url}/chat/completions`` in the OpenAI chat format."""

    def __init__(self, base_url: str, model_name: str, api_key: "str | None" = None,
                 timeout: float = 120.0, transport=None):
        self.base_url = base_url.rstrip("/")
        self.model_name = model_name
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        self.timeout = timeout
        self._post = transport or requests.post

    def send(self, request: ChatRequest, claim_id: "int | None" = None) -> ChatResponse:
        payload = {
            "model": self.model_name,
            "messages": [
                {"role": "system", "content": request.system_message},
                {"role": "user", "content": request.user_message},
            ],
            "temperature": request.temperature,
            "top_p": request.top_p,
            "max_tokens": request.max_new_tokens,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            resp = self._post(f"{self.base_url}/chat/completions", json=payload,
                              headers=headers, timeout=self.timeout)
        except requests.RequestException as exc:
            raise TransportFailure(str(exc)) from exc

        if resp.status_code != 200:
            body = resp.text or ""
            lowered = body.lower()
            if resp.status_code == 413 or any(mark in lowered for mark in _OVERFLOW_MARKERS):
                raise ContextOverflow(f"HTTP {resp.status_code}: {body[:300]}")
            if resp.status_code == 429:
                raise RateLimited(f"HTTP 429: {body[:300]}")
            raise TransportFailure(f"HTTP {resp.status_code}: {body[:300]}")

        try:
            data = resp.json()
            choice = data["choices"][0]
            text = choice["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise MalformedReply(f"unexpected response shape: {exc}") from exc
        finish = choice.get("finish_reason", "stop")
        return ChatResponse(text=text or "", finish_reason="length" if finish == "length" else "stop")


class Gateway:
    """Shared front door for all LLM calls.

    Prompt text passes through untouched. Rate limits are retried with
    exponential backoff up to ``max_attempts`` total sends; context overflows
    (including ones raised preemptively by the client-side prompt budget) go
    straight to the caller. Counters make both visible for diagnostics.
    """

    def __init__(self, backend, max_attempts: int = 5, backoff_base: float = 0.5,
                 prompt_budget: "int | None" = 8000, min_interval: float = 0.0,
                 sleep=time.sleep):
        self.backend = backend
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self.prompt_budget = prompt_budget
        self.min_interval = min_interval
        self._sleep = sleep
        self._lock = threading.Lock()
        self._next_slot = 0.0
        self.overflow_count = 0
        self.rate_limit_count = 0

    def _space_call(self):
        if self.min_interval <= 0:
            return
        with self._lock:
            now = time.monotonic()
            start = max(now, self._next_slot)
            self._next_slot = start + self.min_interval
        if start > now:
            self._sleep(start - now)

    def complete(self, request: ChatRequest, claim_id: "int | None" = None) -> ChatResponse:
        if self.prompt_budget:
            estimate = len(request.system_message.split()) + len(request.user_message.split())
            if estimate > self.prompt_budget:
                with self._lock:
                    self.overflow_count += 1
                raise ContextOverflow(
                    f"prompt estimate {estimate} tokens exceeds budget {self.prompt_budget}"
                )

        failures = 0
        while True:
            self._space_call()
            try:
                return self.backend.send(request, claim_id)
            except RateLimited:
                with self._lock:
                    self.rate_limit_count += 1
                failures += 1
                if failures >= self.max_attempts:
                    raise
                self._sleep(self.backoff_base * (2 ** (failures - 1)))
            except ContextOverflow:
                with self._lock:
                    self.overflow_count += 1
                raise
