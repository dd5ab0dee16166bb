"""Chat backends: a live OpenAI-compatible client and a scripted test double."""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Protocol, Sequence

import httpx

logger = logging.getLogger(__name__)

API_BASE_ENV = "CONSILIUM_API_BASE"
API_KEY_ENV = "CONSILIUM_API_KEY"


class BackendError(RuntimeError):
    pass


class AuthenticationError(BackendError):
    pass


class ProviderError(BackendError):
    pass


class RetryBudgetExhausted(BackendError):
    pass


class ScriptExhausted(BackendError):
    pass


@dataclass(frozen=True)
class ChatRequest:
    model_name: str
    system_text: str
    # (speaker tag, text) pairs; tags are "user" or "assistant".
    user_messages: tuple[tuple[str, str], ...]
    max_tokens: int
    temperature: float = 0.0

    def __post_init__(self):
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")

    @property
    def text(self) -> str:
        return "\n".join([self.system_text, *(text for _, text in self.user_messages)])

    def to_messages(self) -> list[dict[str, str]]:
        return [{"role": "system", "content": self.system_text}] + [
            {"role": tag, "content": text} for tag, text in self.user_messages
        ]


@dataclass(frozen=True)
class ChatResponse:
    text: str
    prompt_tokens: int
    completion_tokens: int
    usage_estimated: bool = False

    def __post_init__(self):
        if self.prompt_tokens < 0 or self.completion_tokens < 0:
            raise ValueError("token counts must be non-negative")


class ChatBackend(Protocol):
    def complete(self, request: ChatRequest) -> ChatResponse: ...

    def fork(self) -> "ChatBackend":
        """Backend to use for one discussion."""
        ...


def estimate_tokens(text: str) -> int:
    """Whitespace-token count. Used only when a provider omits usage."""
    return len(text.split())


def usage_total(responses: Iterable[ChatResponse]) -> tuple[int, int, int]:
    prompt = completion = 0
    for r in responses:
        prompt += r.prompt_tokens
        completion += r.completion_tokens
    return prompt, completion, prompt + completion


@dataclass
class ScriptRule:
    match: tuple[str, ...]
    replies: list[dict[str, Any]]

    def matches(self, text: str) -> bool:
        return all(m in text for m in self.match)


class ScriptedBackend:
    """Deterministic backend driven by ``[{match, replies}]`` rules.

    The first rule whose ``match`` substring (or every substring, when given a
    list) occurs in the request text answers, popping its next reply. A reply
    is a string or ``{"text", "prompt_tokens", "completion_tokens"}``; strings
    get whitespace-estimated usage. No matching rule, or an empty queue on the
    matching rule, raises ScriptExhausted.

    ``fork()`` returns a copy with fresh queues, so each discussion replays the
    script from the start regardless of how discussions interleave. Requests
    land in the fork's ``requests`` and in ``all_requests`` shared with the parent.
    """

    def __init__(self, script: Sequence[dict[str, Any]]):
        self._script = [self._normalize(i, entry) for i, entry in enumerate(script)]
        self._rules = [ScriptRule(r.match, list(r.replies)) for r in self._script]
        self._lock = threading.Lock()
        self.requests: list[ChatRequest] = []
        # Shared by every fork: all requests seen by this script.
        self.all_requests: list[ChatRequest] = []

    @staticmethod
    def _normalize(i: int, entry: dict[str, Any]) -> ScriptRule:
        if not isinstance(entry, dict) or "match" not in entry or "replies" not in entry:
            raise ValueError(f"script entry {i}: expected an object with 'match' and 'replies'")
        match = entry["match"]
        match = (match,) if isinstance(match, str) else tuple(match)
        replies = []
        for reply in entry["replies"]:
            if isinstance(reply, str):
                replies.append({"text": reply})
            elif isinstance(reply, dict) and isinstance(reply.get("text"), str):
                replies.append(dict(reply))
            else:
                raise ValueError(f"script entry {i}: reply must be a string or an object with 'text'")
        return ScriptRule(match, replies)

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedBackend":
        with open(path, encoding="utf-8") as f:
            script = json.load(f)
        if not isinstance(script, list):
            raise ValueError(f"{path}: script must be a JSON list")
        return cls(script)

    def fork(self) -> "ScriptedBackend":
        clone = ScriptedBackend.__new__(ScriptedBackend)
        clone._script = self._script
        clone._rules = [ScriptRule(r.match, list(r.replies)) for r in self._script]
        clone._lock = threading.Lock()
        clone.requests = []
        clone.all_requests = self.all_requests
        return clone

    def complete(self, request: ChatRequest) -> ChatResponse:
        text = request.text
        with self._lock:
            self.requests.append(request)
            self.all_requests.append(request)
            for rule in self._rules:
                if rule.matches(text):
                    if not rule.replies:
                        raise ScriptExhausted(f"reply queue for match {list(rule.match)!r} is exhausted")
                    reply = rule.replies.pop(0)
                    break
            else:
                raise ScriptExhausted("no script rule matches the request")
        if "prompt_tokens" in reply or "completion_tokens" in reply:
            return ChatResponse(reply["text"], int(reply.get("prompt_tokens", 0)),
                                int(reply.get("completion_tokens", 0)))
        return ChatResponse(reply["text"], estimate_tokens(text), estimate_tokens(reply["text"]),
                            usage_estimated=True)


class OpenAICompatibleBackend:
    """Client for an OpenAI-compatible ``/chat/completions`` endpoint.

    Transport errors, 429 and 5xx are retried with capped exponential backoff
    up to ``attempts`` total tries. Safe for concurrent ``complete`` calls.
    """

    def __init__(
        self,
        api_base: str,
        api_key: str,
        *,
        attempts: int = 3,
        backoff: float = 1.0,
        max_backoff: float = 8.0,
        timeout: float = 60.0,
        transport: httpx.BaseTransport | None = None,
        sleep=time.sleep,
    ):
        if not api_base or not api_key:
            raise AuthenticationError(f"set {API_BASE_ENV} and {API_KEY_ENV} for the live backend")
        self.api_base = api_base.rstrip("/")
        self.attempts = attempts
        self.backoff = backoff
        self.max_backoff = max_backoff
        self._sleep = sleep
        self._client = httpx.Client(
            base_url=self.api_base,
            headers={"Authorization": f"Bearer {api_key}"},
            timeout=timeout,
            transport=transport,
        )

    @classmethod
    def from_env(cls, **kwargs: Any) -> "OpenAICompatibleBackend":
        return cls(os.environ.get(API_BASE_ENV, ""), os.environ.get(API_KEY_ENV, ""), **kwargs)

    def fork(self) -> "OpenAICompatibleBackend":
        return self

    def close(self) -> None:
        self._client.close()

    def payload(self, request: ChatRequest) -> dict[str, Any]:
        return {
            "model": request.model_name,
            "messages": request.to_messages(),
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
        }

    def complete(self, request: ChatRequest) -> ChatResponse:
        payload = self.payload(request)
        delay = self.backoff
        last_error = ""
        for attempt in range(1, self.attempts + 1):
            try:
                resp = self._client.post("/chat/completions", json=payload)
            except httpx.TransportError as exc:
                last_error = f"transport error: {exc}"
            else:
                if resp.status_code in (401, 403):
                    raise AuthenticationError(f"provider rejected credentials ({resp.status_code})")
                if resp.status_code == 429 or resp.status_code >= 500:
                    last_error = f"HTTP {resp.status_code}"
                elif resp.status_code >= 400:
                    raise ProviderError(f"HTTP {resp.status_code}: {resp.text[:500]}")
                else:
                    return self._parse(resp, request)
            if attempt < self.attempts:
                logger.warning("chat request failed (%s), retry %d in %.1fs", last_error, attempt, delay)
                self._sleep(delay)
                delay = min(delay * 2, self.max_backoff)
        raise RetryBudgetExhausted(f"gave up after {self.attempts} attempts: {last_error}")

    @staticmethod
    def _parse(resp: httpx.Response, request: ChatRequest) -> ChatResponse:
        try:
            data = resp.json()
            text = data["choices"][0]["message"]["content"] or ""
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"malformed completion payload: {exc}") from None
        usage = data.get("usage") or {}
        if "prompt_tokens" in usage and "completion_tokens" in usage:
            return ChatResponse(text, int(usage["prompt_tokens"]), int(usage["completion_tokens"]))
        return ChatResponse(text, estimate_tokens(request.text), estimate_tokens(text), usage_estimated=True)
