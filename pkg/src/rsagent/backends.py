"""Chat-completion backends: a live OpenAI-compatible client and a scripted stand-in.

The scripted backend is the foundation of every end-to-end test: its replies
are a pure function of (turn index, last user message), so whole agent traces
replay bit-identically.
"""
from __future__ import annotations

import os
import re
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import httpx
import yaml

API_KEY_ENV = "OPENAI_API_KEY"


class BackendError(Exception):
    """Hard backend failure; the planner aborts the plan on these."""


class TransportError(BackendError):
    pass


class AuthError(BackendError):
    pass


class ScriptExhausted(BackendError):
    pass


class MalformedScript(ValueError):
    pass


@dataclass(frozen=True)
class ChatMessage:
    role: str  # system | user | assistant
    content: str


def validate_messages(messages: Sequence[ChatMessage]) -> None:
    if not messages:
        raise ValueError("empty message list")
    system_count = sum(1 for m in messages if m.role == "system")
    if system_count != 1 or messages[0].role != "system":
        raise ValueError("exactly one system message is required, and it must come first")
    for m in messages:
        if m.role not in ("system", "user", "assistant"):
            raise ValueError(f"unknown role {m.role!r}")
        if m.role in ("user", "assistant") and not m.content:
            raise ValueError(f"empty {m.role} message")


class OpenAIChatBackend:
    """POST {base}/v1/chat/completions with bearer auth and bounded retries.

    The API key is read from the environment at call time and never stored,
    logged, or echoed. Transient transport failures (timeouts, 429, 5xx)
    retry with exponential backoff; auth failures do not retry.
    """

    def __init__(
        self,
        model: str,
        base_url: str = "https://api.openai.com",
        temperature: float = 0.0,
        timeout: float = 60.0,
        max_retries: int = 3,
        transport: Optional[httpx.BaseTransport] = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if temperature < 0:
            raise ValueError("temperature must be >= 0")
        if timeout <= 0:
            raise ValueError("timeout must be positive")
        self.model = model
        self.temperature = temperature
        self.max_retries = max_retries
        self._sleep = sleep
        self._client = httpx.Client(base_url=base_url, timeout=timeout, transport=transport)

    def __repr__(self) -> str:
        return f"OpenAIChatBackend(model={self.model!r})"

    def complete(self, messages: Sequence[ChatMessage]) -> str:
        validate_messages(messages)
        body = {
            "model": self.model,
            "messages": [{"role": m.role, "content": m.content} for m in messages],
            "temperature": self.temperature,
        }
        headers = {}
        api_key = os.environ.get(API_KEY_ENV)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        delay = 0.5
        last_error: Optional[Exception] = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                self._sleep(delay)
                delay *= 2
            try:
                response = self._client.post("/v1/chat/completions", json=body, headers=headers)
            except httpx.HTTPError as exc:
                last_error = exc
                continue
            if response.status_code in (401, 403):
                raise AuthError(f"authentication failed (HTTP {response.status_code})")
            if response.status_code == 429 or response.status_code >= 500:
                last_error = TransportError(f"HTTP {response.status_code}")
                continue
            if response.status_code != 200:
                raise TransportError(f"HTTP {response.status_code}: {response.text[:200]}")
            try:
                return response.json()["choices"][0]["message"]["content"]
            except (KeyError, IndexError, TypeError, ValueError) as exc:
                raise TransportError(f"malformed completion response: {exc}") from exc
        raise TransportError(f"retries exhausted: {last_error}")


class ScriptedBackend:
    """Deterministic responses from a script, by turn index or by pattern.

    Index mode replays an ordered response list; pattern mode answers with
    the first rule whose regex matches the last user message. The turn
    counter belongs to this instance: fork() once per session.
    """

    def __init__(
        self,
        responses: Optional[list[str]] = None,
        rules: Optional[list[tuple[re.Pattern, str]]] = None,
    ):
        if (responses is None) == (rules is None):
            raise MalformedScript("script must define exactly one of index responses or pattern rules")
        self._responses = responses
        self._rules = rules
        self._turn = 0

    @classmethod
    def from_responses(cls, responses: Sequence[str]) -> "ScriptedBackend":
        return cls(responses=list(responses))

    @classmethod
    def from_rules(cls, rules: Sequence[tuple[str, str]]) -> "ScriptedBackend":
        return cls(rules=[(re.compile(pattern, re.DOTALL), response) for pattern, response in rules])

    def fork(self) -> "ScriptedBackend":
        """Fresh per-session instance: same script, turn counter reset."""
        clone = ScriptedBackend.__new__(ScriptedBackend)
        clone._responses = self._responses
        clone._rules = self._rules
        clone._turn = 0
        return clone

    def complete(self, messages: Sequence[ChatMessage]) -> str:
        validate_messages(messages)
        if self._responses is not None:
            if self._turn >= len(self._responses):
                raise ScriptExhausted(f"script exhausted after {len(self._responses)} turns")
            response = self._responses[self._turn]
            self._turn += 1
            return response
        last_user = next((m.content for m in reversed(messages) if m.role == "user"), "")
        for pattern, response in self._rules:
            if pattern.search(last_user):
                return response
        raise ScriptExhausted(f"no pattern matched the last user message: {last_user[:120]!r}")


def load_script(path: Path | str) -> ScriptedBackend:
    """Load a YAML script: a plain list (index mode) or a mode/rules document."""
    raw = Path(path).read_text()
    try:
        doc = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise MalformedScript(f"unparseable script: {exc}") from exc
    return script_from_document(doc)


def script_from_document(doc) -> ScriptedBackend:
    if doc is None:
        return ScriptedBackend.from_responses([])
    if isinstance(doc, list):
        return ScriptedBackend.from_responses([_require_str(v, "response") for v in doc])
    if not isinstance(doc, dict):
        raise MalformedScript(f"script must be a list or a mapping, got {type(doc).__name__}")
    has_responses = "responses" in doc
    has_rules = "rules" in doc
    if has_responses and has_rules:
        raise MalformedScript("index and pattern modes may not be mixed in one script")
    mode = doc.get("mode")
    if has_responses or mode == "index":
        responses = doc.get("responses", [])
        if not isinstance(responses, list):
            raise MalformedScript("'responses' must be a list")
        return ScriptedBackend.from_responses([_require_str(v, "response") for v in responses])
    if has_rules or mode == "pattern":
        rules = doc.get("rules", [])
        if not isinstance(rules, list):
            raise MalformedScript("'rules' must be a list")
        parsed = []
        for rule in rules:
            if not isinstance(rule, dict) or "match" not in rule or "response" not in rule:
                raise MalformedScript(f"pattern rule needs 'match' and 'response': {rule!r}")
            try:
                compiled = re.compile(str(rule["match"]), re.DOTALL)
            except re.error as exc:
                raise MalformedScript(f"bad rule regex {rule['match']!r}: {exc}") from exc
            parsed.append((compiled, _require_str(rule["response"], "response")))
        return ScriptedBackend(rules=parsed)
    raise MalformedScript("script must declare 'responses' (index mode) or 'rules' (pattern mode)")


def _require_str(value, label: str) -> str:
    if not isinstance(value, str):
        raise MalformedScript(f"{label} must be a string, got {type(value).__name__}")
    return value


BackendProvider = Callable[[], object]


def make_backend_provider(spec: str, base_url: Optional[str] = None) -> BackendProvider:
    """Parse a backend selector: 'openai:<model>' or 'mock:<script path>'.

    Returns a zero-argument factory producing the backend for one session:
    live backends are shared (stateless per call), scripted backends fork so
    each session starts at turn zero.
    """
    kind, _, rest = spec.partition(":")
    if kind == "openai":
        if not rest:
            raise ValueError("expected openai:<model name>")
        shared = OpenAIChatBackend(model=rest, **({"base_url": base_url} if base_url else {}))
        return lambda: shared
    if kind == "mock":
        if not rest:
            raise ValueError("expected mock:<script path>")
        template = load_script(rest)
        return template.fork
    raise ValueError(f"unknown backend kind {kind!r}; use openai:<model> or mock:<script>")
