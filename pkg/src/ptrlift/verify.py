"""Toolchain drivers: type-check without linking, run the test suite, and
turn their output into structured results."""

from __future__ import annotations

import json
import os
import re
import shlex
import signal
import subprocess
import time
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ToolchainMissingError
from .source_index import FunctionRecord

DEFAULT_CHECK_COMMAND = "cargo check --all-targets --message-format=json"
DEFAULT_TEST_COMMAND = "cargo test --no-fail-fast"
DEFAULT_TIMEOUT = 600.0

ERROR_LEVELS = ("error", "error: internal compiler error")


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    file_path: str
    line: int
    column: int
    rendered: str

    @property
    def location(self) -> str:
        return f"{self.file_path}:{self.line}:{self.column}"

    @property
    def description(self) -> str:
        return f"error[{self.code}]: {self.message}" if self.code else f"error: {self.message}"


@dataclass
class TestOutcome:
    __test__ = False  # not a pytest class despite the name

    test_name: str
    status: str  # "pass", "fail" or "not-run"
    output: str = ""
    backtrace: str = ""
    reason: str = ""


@dataclass
class VerifyResult:
    compiled: bool
    diagnostics: list[Diagnostic] = field(default_factory=list)
    tests: list[TestOutcome] = field(default_factory=list)
    wall_time: float = 0.0
    raw_output: str = ""
    timed_out: bool = False

    @property
    def pass_set(self) -> frozenset[str]:
        return frozenset(t.test_name for t in self.tests if t.status == "pass")

    @property
    def failures(self) -> list[TestOutcome]:
        return [t for t in self.tests if t.status == "fail"]

    def preserves(self, baseline: frozenset[str]) -> bool:
        return self.compiled and baseline <= self.pass_set


def _argv(command) -> list[str]:
    return shlex.split(command) if isinstance(command, str) else list(command)


def workspace_root(workspace) -> Path:
    """Accept a Workspace or a plain path (which has its own ``root``)."""
    if isinstance(workspace, (str, os.PathLike)):
        return Path(workspace)
    return Path(workspace.root)



@dataclass
class _Run:
    returncode: int | None
    stdout: str
    stderr: str
    timed_out: bool
    elapsed: float


def _run(argv: list[str], cwd: Path, timeout: float, env: dict | None = None, merge: bool = False) -> _Run:
    full_env = dict(os.environ)
    full_env.setdefault("CARGO_TERM_COLOR", "never")
    if env:
        full_env.update(env)
    start = time.monotonic()
    try:
        proc = subprocess.Popen(
            argv,
            cwd=cwd,
            env=full_env,
            stdout=subprocess.PIPE,
            stderr=subprocess.STDOUT if merge else subprocess.PIPE,
            start_new_session=True,
        )
    except FileNotFoundError as exc:
        raise ToolchainMissingError(f"toolchain command not found: {argv[0]}") from exc
    timed_out = False
    try:
        out, err = proc.communicate(timeout=timeout)
    except subprocess.TimeoutExpired:
        timed_out = True
        try:
            os.killpg(proc.pid, signal.SIGKILL)
        except ProcessLookupError:
            pass
        out, err = proc.communicate()
    decode = lambda b: (b or b"").decode("utf-8", errors="replace")
    return _Run(
        None if timed_out else proc.returncode,
        decode(out),
        decode(err),
        timed_out,
        time.monotonic() - start,
    )


# -- diagnostics -----------------------------------------------------------

def _relative(path: str, root: Path) -> str:
    p = Path(path)
    if p.is_absolute():
        try:
            return p.relative_to(root).as_posix()
        except ValueError:
            return p.as_posix()
    return p.as_posix()


def _is_summary(message: str) -> bool:
    return message.startswith("aborting due to") or message.startswith("could not compile")


def parse_json_diagnostics(stream: str, root: Path = Path(".")) -> list[Diagnostic] | None:
    """Error-level diagnostics from cargo's JSON-lines output, deduplicated.
    Returns None when the stream holds no JSON records at all."""
    seen_json = False
    diags: list[Diagnostic] = []
    keys = set()
    for line in stream.splitlines():
        line = line.strip()
        if not line.startswith("{"):
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError:
            continue
        seen_json = True
        if record.get("reason") != "compiler-message":
            continue
        msg = record.get("message") or {}
        if msg.get("level") not in ERROR_LEVELS or _is_summary(msg.get("message", "")):
            continue
        spans = msg.get("spans") or []
        primary = next((s for s in spans if s.get("is_primary")), spans[0] if spans else None)
        if primary is not None:
            file_path = _relative(primary.get("file_name", ""), root)
            line_no, col = int(primary.get("line_start", 1)), int(primary.get("column_start", 1))
        else:
            file_path, line_no, col = "", 1, 1
        code = (msg.get("code") or {}).get("code", "") or ""
        diag = Diagnostic(code, msg.get("message", ""), file_path, max(line_no, 1), max(col, 1), msg.get("rendered") or "")
        key = (diag.code, diag.message, diag.file_path, diag.line, diag.column)
        if key not in keys:
            keys.add(key)
            diags.append(diag)
    return diags if seen_json else None


_TEXT_DIAG = re.compile(
    r"^error(?:\[(?P<code>E\d+)\])?: (?P<msg>.+)\n(?:.*\n)??\s*--> (?P<file>[^\n:]+):(?P<line>\d+):(?P<col>\d+)",
    re.MULTILINE,
)


def parse_text_diagnostics(text: str, root: Path = Path(".")) -> list[Diagnostic]:
    """Fallback parser for human-readable rustc output."""
    diags = []
    keys = set()
    blocks = re.split(r"\n(?=error|warning)", text)
    for m in _TEXT_DIAG.finditer(text):
        if _is_summary(m.group("msg")):
            continue
        rendered = next((b for b in blocks if m.group(0).split("\n")[0] in b), m.group(0))
        diag = Diagnostic(
            m.group("code") or "",
            m.group("msg").strip(),
            _relative(m.group("file"), root),
            int(m.group("line")),
            int(m.group("col")),
            rendered.strip(),
        )
        key = (diag.code, diag.message, diag.file_path, diag.line)
        if key not in keys:
            keys.add(key)
            diags.append(diag)
    return diags


def _synthetic(raw: str, message: str) -> Diagnostic:
    return Diagnostic("", message, "", 1, 1, raw)


def compile_check(workspace, command=DEFAULT_CHECK_COMMAND, timeout: float = DEFAULT_TIMEOUT) -> VerifyResult:
    root = workspace_root(workspace)
    run = _run(_argv(command), root, timeout)
    raw = run.stdout + ("\n" + run.stderr if run.stderr else "")
    if run.timed_out:
        return VerifyResult(False, [_synthetic(raw, f"type check timed out after {timeout:g}s")], [], run.elapsed, raw, True)
    diags = parse_json_diagnostics(run.stdout, root)
    if diags is None:
        diags = parse_text_diagnostics(raw, root)
    if not diags and run.returncode != 0:
        diags = [_synthetic(raw, "type check failed without recognisable diagnostics")]
    return VerifyResult(not diags, diags, [], run.elapsed, raw)


# -- tests -----------------------------------------------------------------

_TEST_LINE = re.compile(r"^test (?P<name>.+?) \.\.\. (?P<status>ok|FAILED|ignored)\b", re.MULTILINE)
_SECTION = re.compile(r"^---- (?P<name>.+?) stdout ----$", re.MULTILINE)
_LIST_LINE = re.compile(r"^(?P<name>.+): test$", re.MULTILINE)


def _clean_name(name: str) -> str:
    return re.sub(r" - should panic(?: with message.*)?$", "", name.strip())


def _failure_sections(text: str) -> dict[str, str]:
    sections = {}
    matches = list(_SECTION.finditer(text))
    for i, m in enumerate(matches):
        end = matches[i + 1].start() if i + 1 < len(matches) else len(text)
        body = text[m.end():end]
        stop = re.search(r"^(?:failures:|successes:)$", body, re.MULTILINE)
        if stop:
            body = body[: stop.start()]
        sections[_clean_name(m.group("name"))] = body.strip("\n")
    return sections


def _backtrace(section: str) -> str:
    idx = section.find("stack backtrace:")
    return section[idx:].strip() if idx >= 0 else ""


def parse_libtest_output(text: str) -> list[TestOutcome]:
    sections = _failure_sections(text)
    outcomes: dict[str, TestOutcome] = {}
    for m in _TEST_LINE.finditer(text):
        name = _clean_name(m.group("name"))
        status = {"ok": "pass", "FAILED": "fail"}.get(m.group("status"), "not-run")
        if status == "fail":
            output = sections.get(name) or m.group(0)
            outcome = TestOutcome(name, "fail", output, _backtrace(output))
        elif status == "pass":
            outcome = TestOutcome(name, "pass")
        else:
            outcome = TestOutcome(name, "not-run", reason="ignored")
        prev = outcomes.get(name)
        # same name in two test binaries: a failure anywhere wins
        if prev is None or prev.status != "fail":
            outcomes[name] = outcome
    return list(outcomes.values())


def _list_command(test_argv: list[str]) -> list[str]:
    return test_argv + (["--list"] if "--" in test_argv else ["--", "--list"])


def run_tests(
    workspace,
    test_command=DEFAULT_TEST_COMMAND,
    enable_backtrace: bool = True,
    timeout: float = DEFAULT_TIMEOUT,
) -> VerifyResult:
    root = workspace_root(workspace)
    argv = _argv(test_command)
    env = {"RUST_BACKTRACE": "1" if enable_backtrace else "0"}
    run = _run(argv, root, timeout, env=env, merge=True)
    raw = run.stdout
    tests = parse_libtest_output(raw)

    if run.timed_out:
        reason = f"timeout after {timeout:g}s"
        reported = {t.test_name for t in tests}
        listing = _run(_list_command(argv), root, max(timeout, 60.0), merge=True)
        names = [n for n in (_clean_name(m.group("name")) for m in _LIST_LINE.finditer(listing.stdout)) if n not in reported]
        if names:
            tests.extend(TestOutcome(n, "not-run", reason=reason) for n in dict.fromkeys(names))
        elif not tests or all(t.status != "not-run" for t in tests):
            tests.append(TestOutcome("<unreported>", "not-run", reason=reason))
        return VerifyResult(True, [], tests, run.elapsed, raw, True)

    if not tests and run.returncode != 0:
        diags = parse_text_diagnostics(raw, root)
        if diags:
            return VerifyResult(False, diags, [], run.elapsed, raw)
        return VerifyResult(False, [_synthetic(raw, "test command failed before running any test")], [], run.elapsed, raw)
    return VerifyResult(True, [], tests, run.elapsed, raw)


def select_target_error(diags: list[Diagnostic], fn: FunctionRecord) -> Diagnostic:
    if not diags:
        raise ValueError("no diagnostics to choose from")
    inside = [
        d for d in diags
        if d.file_path == fn.file_path and fn.start_line <= d.line <= fn.end_line
    ]
    if inside:
        return min(inside, key=lambda d: d.line)
    return diags[0]


def execution_log(result: VerifyResult, limit: int = 12000) -> str:
    """Failure output for the test-fix prompt, truncated from the middle."""
    parts = [f"---- {t.test_name} ----\n{t.output}" for t in result.failures]
    parts += [f"---- {t.test_name} (not run: {t.reason}) ----" for t in result.tests if t.status == "not-run" and t.reason != "ignored"]
    text = "\n\n".join(parts) if parts else result.raw_output
    if len(text) > limit:
        half = limit // 2
        text = text[:half] + "\n...[truncated]...\n" + text[-half:]
    return text


@dataclass
class Toolchain:
    """Configured commands and timeouts for one project."""

    check_command: str = DEFAULT_CHECK_COMMAND
    test_command: str = DEFAULT_TEST_COMMAND
    check_timeout: float = DEFAULT_TIMEOUT
    test_timeout: float = DEFAULT_TIMEOUT
    backtrace: bool = True

    def check(self, workspace) -> VerifyResult:
        return compile_check(workspace, self.check_command, self.check_timeout)

    def test(self, workspace) -> VerifyResult:
        return run_tests(workspace, self.test_command, self.backtrace, self.test_timeout)
