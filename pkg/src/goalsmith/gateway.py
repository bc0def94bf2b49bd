"""Chat-completion backend abstraction with live, record, and replay modes.

Requests are canonicalized and hashed; the replay backend serves recorded
completions keyed by that digest, which makes the whole downstream pipeline
deterministic and offline-testable. Live mode talks to any
chat-completions-compatible HTTP endpoint; base URL and credential come from
environment variables only.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

ENV_BASE_URL = "GOALSMITH_LLM_BASE_URL"
ENV_API_KEY = "GOALSMITH_LLM_API_KEY"


class BackendError(RuntimeError):
    """Network, auth, or contract failure from a completion backend."""


class MissingFixtureError(BackendError):
    def __init__(self, digest: str):
        super().__init__(f"no recorded completion for request digest {digest}")
        self.digest = digest


class EmptyCompletionError(BackendError):
    pass


@dataclass(frozen=True)
class ChatRequest:
    model: str
    messages: tuple[tuple[str, str], ...]
    temperature: float = 0.2
    max_tokens: int = 1024

    def __post_init__(self):
        object.__setattr__(self, "messages", tuple((r, c) for r, c in self.messages))
        if not self.messages:
            raise ValueError("request needs at least one message")
        if not (0.0 <= self.temperature <= 2.0):
            raise ValueError("temperature must be within [0, 2]")

    @classmethod
    def user(cls, text: str, model: str = "gpt-3.5-turbo", **kw) -> "ChatRequest":
        return cls(model=model, messages=(("user", text),), **kw)


def canonical_request(r: ChatRequest) -> dict:
    return {
        "model": r.model,
        "messages": [{"role": role, "content": content} for role, content in r.messages],
        "temperature": round(float(r.temperature), 6),
        "max_tokens": int(r.max_tokens),
    }


def request_digest(r: ChatRequest) -> str:
    payload = json.dumps(canonical_request(r), sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class Transcript:
    request_digest: str
    request: dict
    response: str
    timestamp: float
    backend: str


class Backend:
    name = "abstract"

    def complete(self, r: ChatRequest) -> str:
        raise NotImplementedError


class ScriptedBackend(Backend):
    """Serves a fixed queue of completions; used to author replay fixtures
    and to test the loop without any fixture files."""

    name = "scripted"

    def __init__(self, responses):
        self._responses = list(responses)
        self.requests: list[ChatRequest] = []

    def complete(self, r: ChatRequest) -> str:
        self.requests.append(r)
        if not self._responses:
            raise BackendError("scripted backend ran out of responses")
        return self._responses.pop(0)


class ReplayBackend(Backend):
    name = "replay"

    def __init__(self, fixture_dir):
        self._dir = Path(fixture_dir)

    def complete(self, r: ChatRequest) -> str:
        digest = request_digest(r)
        path = self._dir / f"{digest}.json"
        if not path.exists():
            raise MissingFixtureError(digest)
        stored = json.loads(path.read_text(encoding="utf-8"))
        response = stored["response"]
        if not response:
            raise EmptyCompletionError(f"fixture {digest} holds an empty completion")
        return response


class RecordBackend(Backend):
    name = "record"

    def __init__(self, inner: Backend, fixture_dir):
        self._inner = inner
        self._dir = Path(fixture_dir)
        self._dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def complete(self, r: ChatRequest) -> str:
        response = self._inner.complete(r)
        digest = request_digest(r)
        transcript = Transcript(
            request_digest=digest,
            request=canonical_request(r),
            response=response,
            timestamp=time.time(),
            backend=self._inner.name,
        )
        payload = json.dumps(
            {
                "digest": transcript.request_digest,
                "request": transcript.request,
                "response": transcript.response,
                "timestamp": transcript.timestamp,
                "backend": transcript.backend,
            },
            indent=2,
            ensure_ascii=False,
        )
        with self._lock:
            (self._dir / f"{digest}.json").write_text(payload + "\n", encoding="utf-8")
        return response


class LiveBackend(Backend):
    name = "live"

    def __init__(self, base_url: str | None = None, api_key: str | None = None, timeout: float = 60.0):
        self._base_url = (base_url or os.environ.get(ENV_BASE_URL, "")).rstrip("/")
        self._api_key = api_key or os.environ.get(ENV_API_KEY, "")
        self._timeout = timeout
        if not self._base_url:
            raise BackendError(f"live backend needs a base URL ({ENV_BASE_URL})")

    def complete(self, r: ChatRequest) -> str:
        import requests

        headers = {"Content-Type": "application/json"}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"
        try:
            resp = requests.post(
                f"{self._base_url}/chat/completions",
                json=canonical_request(r),
                headers=headers,
                timeout=self._timeout,
            )
            resp.raise_for_status()
            body = resp.json()
        except requests.RequestException as e:
            raise BackendError(f"completion request failed: {e}") from e
        try:
            text = body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as e:
            raise BackendError(f"unexpected completion payload: {body!r}") from e
        if not text:
            raise EmptyCompletionError("backend returned an empty completion")
        return text


@dataclass(frozen=True)
class ExtractedCode:
    text: str
    fenced: bool  # False means the whole completion was taken with a warning

    @property
    def warning(self) -> str | None:
        return None if self.fenced else "completion had no fenced code block; using full text"


_FENCE_RE = re.compile(r"```[ \t]*[A-Za-z0-9_+-]*[ \t]*\n(.*?)```", re.DOTALL)


def extract_code(completion: str) -> ExtractedCode:
    """Content of the first fenced code block; without a fence, the whole
    completion is returned flagged with a warning."""
    if not completion or not completion.strip():
        raise EmptyCompletionError("cannot extract code from an empty completion")
    match = _FENCE_RE.search(completion)
    if match:
        return ExtractedCode(text=match.group(1).rstrip() + "\n", fenced=True)
    return ExtractedCode(text=completion.strip() + "\n", fenced=False)


def make_backend(mode: str, fixture_dir=None, model: str = "gpt-3.5-turbo") -> Backend:
    if mode == "replay":
        if fixture_dir is None:
            raise BackendError("replay mode requires a fixture directory")
        return ReplayBackend(fixture_dir)
    if mode == "record":
        if fixture_dir is None:
            raise BackendError("record mode requires a fixture directory")
        return RecordBackend(LiveBackend(), fixture_dir)
    if mode == "live":
        return LiveBackend()
    raise BackendError(f"unknown backend mode {mode!r}")
