"""Model gateway: conversations, token accounting, and pluggable backends
(an HTTP chat-completions client and a replay backend for offline runs)."""

from __future__ import annotations

import json
import math
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

import httpx

from .errors import ConfigError, ReplayLoadError, ReplayMiss, TransportError

DEFAULT_MODEL = "gpt-4o-mini"
DEFAULT_API_KEY_ENV = "OPENAI_API_KEY"
DEFAULT_BASE_URL = "https://api.openai.com/v1"


@dataclass(frozen=True)
class Usage:
    input_tokens: int
    output_tokens: int
    estimated: bool = False


@dataclass
class Turn:
    role: str  # "user" or "assistant"
    text: str
    usage: Usage | None = None


@dataclass
class Conversation:
    conversation_id: str
    model_id: str = DEFAULT_MODEL
    temperature: float = 0.0
    turns: list[Turn] = field(default_factory=list)

    def _expect(self, role: str) -> None:
        want = "user" if len(self.turns) % 2 == 0 else "assistant"
        if role != want:
            raise ValueError(f"conversation {self.conversation_id}: expected a {want} turn, got {role}")

    def add_user(self, text: str) -> None:
        self._expect("user")
        self.turns.append(Turn("user", text))

    def add_assistant(self, text: str, usage: Usage | None = None) -> None:
        self._expect("assistant")
        self.turns.append(Turn("assistant", text, usage))

    @property
    def assistant_turns(self) -> int:
        return sum(1 for t in self.turns if t.role == "assistant")

    def messages(self) -> list[dict]:
        return [{"role": t.role, "content": t.text} for t in self.turns]


@dataclass
class UsageRecord:
    input_tokens: int = 0
    output_tokens: int = 0
    rounds: int = 0
    estimated: bool = False

    def add(self, usage: Usage) -> None:
        self.input_tokens += usage.input_tokens
        self.output_tokens += usage.output_tokens
        self.rounds += 1
        self.estimated = self.estimated or usage.estimated

    def merge(self, other: "UsageRecord") -> None:
        self.input_tokens += other.input_tokens
        self.output_tokens += other.output_tokens
        self.rounds += other.rounds
        self.estimated = self.estimated or other.estimated


@dataclass(frozen=True)
class PriceSheet:
    input_rate: float = 0.150  # currency per million input tokens
    output_rate: float = 0.600  # currency per million output tokens

    def __post_init__(self):
        if self.input_rate < 0 or self.output_rate < 0:
            raise ValueError("token rates must be non-negative")


def cost(usage: UsageRecord, prices: PriceSheet = PriceSheet()) -> float:
    return usage.input_tokens * prices.input_rate / 1e6 + usage.output_tokens * prices.output_rate / 1e6


def estimate_tokens(text: str) -> int:
    return math.ceil(len(text.encode("utf-8")) / 4)


@dataclass(frozen=True)
class Completion:
    text: str
    usage: Usage | None = None


class Backend(Protocol):
    def complete(self, conversation: Conversation) -> Completion: ...


# -- transcripts and replay ------------------------------------------------

def _turn_record(turn: Turn) -> dict:
    record = {"role": turn.role, "text": turn.text}
    if turn.usage is not None:
        record["usage"] = {
            "input_tokens": turn.usage.input_tokens,
            "output_tokens": turn.usage.output_tokens,
            "estimated": turn.usage.estimated,
        }
    return record


def record_transcript(conv: Conversation, directory) -> Path:
    """Write ``<conversation_id>.jsonl``: one role-tagged turn per line, with
    token usage stored on assistant lines."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{conv.conversation_id}.jsonl"
    lines = [json.dumps(_turn_record(t), ensure_ascii=False) for t in conv.turns]
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    return path


def _parse_transcript(path: Path) -> list[Turn]:
    turns = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ReplayLoadError(path, lineno, exc.msg) from exc
        if not isinstance(record, dict):
            raise ReplayLoadError(path, lineno, "expected a JSON object")
        role, text = record.get("role"), record.get("text")
        if role not in ("user", "assistant"):
            raise ReplayLoadError(path, lineno, f"unknown role {role!r}")
        if not isinstance(text, str):
            raise ReplayLoadError(path, lineno, "missing text")
        usage = None
        if role == "assistant" and record.get("usage") is not None:
            u = record["usage"]
            try:
                usage = Usage(int(u["input_tokens"]), int(u["output_tokens"]), bool(u.get("estimated", False)))
            except (KeyError, TypeError, ValueError) as exc:
                raise ReplayLoadError(path, lineno, f"bad usage record: {exc}") from exc
        turns.append(Turn(role, text, usage))
    return turns


class ReplayBackend:
    """Serves recorded assistant turns, in order, per conversation id.
    User turns in the script are kept for audit but not compared."""

    def __init__(self, scripts: dict[str, list[Turn]] | None = None):
        self.scripts = {
            cid: [t for t in turns if t.role == "assistant"] for cid, turns in (scripts or {}).items()
        }

    def complete(self, conversation: Conversation) -> Completion:
        index = conversation.assistant_turns
        replies = self.scripts.get(conversation.conversation_id, [])
        if index >= len(replies):
            raise ReplayMiss(conversation.conversation_id, index + 1)
        turn = replies[index]
        return Completion(turn.text, turn.usage)


def load_replay(script_dir) -> ReplayBackend:
    script_dir = Path(script_dir)
    if not script_dir.is_dir():
        raise ConfigError(f"replay directory not found: {script_dir}")
    scripts = {path.stem: _parse_transcript(path) for path in sorted(script_dir.glob("*.jsonl"))}
    return ReplayBackend(scripts)


# -- live backend ----------------------------------------------------------

class ChatCompletionsBackend:
    """OpenAI-style ``/chat/completions`` over HTTP."""

    RETRYABLE_STATUS = {408, 409, 429, 500, 502, 503, 504}

    def __init__(
        self,
        base_url: str = DEFAULT_BASE_URL,
        api_key: str | None = None,
        api_key_env: str = DEFAULT_API_KEY_ENV,
        timeout: float = 120.0,
        retries: int = 3,
        backoff: float = 1.0,
        client: httpx.Client | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        key = api_key if api_key is not None else os.environ.get(api_key_env)
        if not key:
            raise ConfigError(f"no API key: set {api_key_env} or use a replay directory")
        self.url = base_url.rstrip("/") + "/chat/completions"
        self.headers = {"Authorization": f"Bearer {key}"}
        self.retries = retries
        self.backoff = backoff
        self.sleep = sleep
        self.client = client or httpx.Client(timeout=timeout)

    def complete(self, conversation: Conversation) -> Completion:
        body = {
            "model": conversation.model_id,
            "messages": conversation.messages(),
            "temperature": conversation.temperature,
        }
        last_error = "no attempt made"
        for attempt in range(self.retries + 1):
            if attempt:
                self.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                resp = self.client.post(self.url, json=body, headers=self.headers)
            except httpx.HTTPError as exc:
                last_error = f"{type(exc).__name__}: {exc}"
                continue
            if resp.status_code in self.RETRYABLE_STATUS:
                last_error = f"HTTP {resp.status_code}"
                continue
            if resp.status_code >= 400:
                raise TransportError(f"HTTP {resp.status_code} from {self.url}: {resp.text[:200]}")
            data = resp.json()
            text = data["choices"][0]["message"].get("content") or ""
            usage = data.get("usage")
            if usage and "prompt_tokens" in usage:
                return Completion(text, Usage(int(usage["prompt_tokens"]), int(usage.get("completion_tokens", 0))))
            return Completion(text)
        raise TransportError(f"{self.url} unreachable after {self.retries} retries ({last_error})")


# -- gateway ---------------------------------------------------------------

class Gateway:
    """Submits turns, keeps usage totals and per-(project, pointer, phase)
    breakdowns. Safe to share between threads; each Conversation must stay
    with one pipeline run."""

    def __init__(self, backend: Backend, model_id: str = DEFAULT_MODEL, temperature: float = 0.0, record_dir=None):
        self.backend = backend
        self.model_id = model_id
        self.temperature = temperature
        self.record_dir = Path(record_dir) if record_dir else None
        self.usage = UsageRecord()
        self.by_tag: dict[tuple[str, str, str], UsageRecord] = {}
        self._lock = threading.Lock()

    def conversation(self, conversation_id: str) -> Conversation:
        return Conversation(conversation_id, self.model_id, self.temperature)

    def submit(self, conv: Conversation, text: str, project: str = "", pointer: str = "", phase: str = "") -> str:
        if conv.temperature != self.temperature or conv.model_id != self.model_id:
            raise ValueError("conversation decoding parameters differ from the gateway's")
        conv.add_user(text)
        try:
            completion = self.backend.complete(conv)
        except Exception:
            conv.turns.pop()
            raise
        usage = completion.usage
        if usage is None:
            sent = "".join(t.text for t in conv.turns)
            usage = Usage(estimate_tokens(sent), estimate_tokens(completion.text), estimated=True)
        conv.add_assistant(completion.text, usage)
        with self._lock:
            self.usage.add(usage)
            self.by_tag.setdefault((project, pointer, phase), UsageRecord()).add(usage)
        if self.record_dir is not None:
            record_transcript(conv, self.record_dir)
        return completion.text

    def usage_for(self, project: str | None = None, pointer: str | None = None, phase: str | None = None) -> UsageRecord:
        total = UsageRecord()
        with self._lock:
            for (proj, ptr, ph), rec in self.by_tag.items():
                if (project is None or proj == project) and (pointer is None or ptr == pointer) and (phase is None or ph == phase):
                    total.merge(rec)
        return total
