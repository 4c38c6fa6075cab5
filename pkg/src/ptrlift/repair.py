"""Code change analysis and the compile-error / test-failure repair loops.

Both loops draw on one per-pointer budget: an attempt is refused once
``used == limit``, and every submission made inside a loop costs one.
"""

from __future__ import annotations

import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable

from .errors import CannotFix, ExtractionError, SourceParseError
from .lifting import LiftDecision
from .refactor import (
    Patch,
    RewriteCandidate,
    Workspace,
    apply_patch,
    extract_code_block,
    signature_tokens,
    validate_rewrite,
)
from .source_index import FunctionRecord, RawPointerSite, parse_function_text
from .templates import DEFAULT, Templates, fill
from .verify import Diagnostic, VerifyResult, execution_log, select_target_error

FIXED = "fixed"
GAVE_UP = "gave-up"

NO_CHANGES = "no changes"
DEFAULT_RADIUS = 5
DEFAULT_BUDGET = 5


# -- code change analysis --------------------------------------------------

@dataclass(frozen=True)
class Hunk:
    kind: str  # "added", "deleted" or "modified"
    old_start: int  # 0-based index into the before-lines
    new_start: int  # 0-based index into the after-lines
    old_lines: tuple[str, ...]
    new_lines: tuple[str, ...]

    @property
    def old_span(self) -> range:
        return range(self.old_start, self.old_start + len(self.old_lines))

    @property
    def new_span(self) -> range:
        return range(self.new_start, self.new_start + len(self.new_lines))


@dataclass(frozen=True)
class ChangeSet:
    hunks: tuple[Hunk, ...] = ()

    def __bool__(self) -> bool:
        return bool(self.hunks)

    def __len__(self) -> int:
        return len(self.hunks)

    @property
    def edit_count(self) -> int:
        return sum(len(h.old_lines) + len(h.new_lines) for h in self.hunks)


def _lcs_pairs(a: list[str], b: list[str]) -> list[tuple[int, int]]:
    """Matched index pairs of one longest common subsequence."""
    n, m = len(a), len(b)
    # suffix table: table[i][j] = LCS length of a[i:], b[j:]
    table = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n - 1, -1, -1):
        row, below = table[i], table[i + 1]
        ai = a[i]
        for j in range(m - 1, -1, -1):
            if ai == b[j]:
                row[j] = below[j + 1] + 1
            else:
                row[j] = below[j] if below[j] >= row[j + 1] else row[j + 1]
    pairs = []
    i = j = 0
    while i < n and j < m:
        if a[i] == b[j] and table[i][j] == table[i + 1][j + 1] + 1:
            pairs.append((i, j))
            i += 1
            j += 1
        elif table[i + 1][j] >= table[i][j + 1]:
            i += 1
        else:
            j += 1
    return pairs


def split_lines(text: str) -> list[str]:
    return text.split("\n")


def compute_change_set(before: str, after: str) -> ChangeSet:
    """Line-level minimal edit script between two texts. Each gap between
    consecutive common lines becomes one hunk; a gap with lines on both sides
    is a modification."""
    a, b = split_lines(before), split_lines(after)
    hunks = []
    prev_i = prev_j = 0
    for i, j in _lcs_pairs(a, b) + [(len(a), len(b))]:
        old, new = a[prev_i:i], b[prev_j:j]
        if old or new:
            kind = "modified" if old and new else ("deleted" if old else "added")
            hunks.append(Hunk(kind, prev_i, prev_j, tuple(old), tuple(new)))
        prev_i, prev_j = i + 1, j + 1
    return ChangeSet(tuple(hunks))


def replay_hunks(before: str, changes: ChangeSet) -> str:
    a = split_lines(before)
    out: list[str] = []
    pos = 0
    for h in changes.hunks:
        out.extend(a[pos:h.old_start])
        out.extend(h.new_lines)
        pos = h.old_start + len(h.old_lines)
    out.extend(a[pos:])
    return "\n".join(out)


def format_change_set(changes: ChangeSet) -> str:
    """Unified-diff style hunks, numbered relative to the function."""
    if not changes:
        return NO_CHANGES
    out = []
    for h in changes.hunks:
        old_no = h.old_start + 1 if h.old_lines else h.old_start
        new_no = h.new_start + 1 if h.new_lines else h.new_start
        out.append(f"@@ -{old_no},{len(h.old_lines)} +{new_no},{len(h.new_lines)} @@ {h.kind}")
        out.extend("-" + line for line in h.old_lines)
        out.extend("+" + line for line in h.new_lines)
    return "\n".join(out)


# -- budget and snippets ---------------------------------------------------

@dataclass
class RepairBudget:
    limit: int = DEFAULT_BUDGET
    used: int = 0

    def __post_init__(self):
        if self.limit < 1:
            raise ValueError("budget limit must be at least 1")

    @property
    def exhausted(self) -> bool:
        return self.used >= self.limit

    def try_consume(self) -> bool:
        if self.used >= self.limit:
            return False
        self.used += 1
        return True


@dataclass(frozen=True)
class FocusSnippet:
    center_line: int  # 1-based, relative to the function text
    radius_lines: int
    start_line: int
    end_line: int
    text: str


def focus_snippet(function_text: str, center_line: int, radius: int = DEFAULT_RADIUS) -> FocusSnippet:
    lines = split_lines(function_text)
    center = min(max(center_line, 1), len(lines))
    start = max(1, center - radius)
    end = min(len(lines), center + radius)
    return FocusSnippet(center, radius, start, end, "\n".join(lines[start - 1:end]))


def splice_snippet(function_text: str, snippet: FocusSnippet, replacement: str) -> str:
    lines = split_lines(function_text)
    return "\n".join(lines[: snippet.start_line - 1] + split_lines(replacement) + lines[snippet.end_line:])


def _full_function_reply(current: FunctionRecord, code: str) -> bool:
    """Models sometimes answer a snippet request with the whole function."""
    try:
        parsed = parse_function_text(code)
    except SourceParseError:
        return False
    return signature_tokens(parsed.signature_text) == signature_tokens(current.signature_text)


# -- prompts ---------------------------------------------------------------

def build_compile_fix_prompt(
    diag: Diagnostic,
    current_fn: str,
    snippet: FocusSnippet,
    changes: ChangeSet,
    templates: Templates = DEFAULT,
    fn_start_line: int | None = None,
) -> str:
    site = diag.location
    if fn_start_line is not None and diag.file_path:
        site += f" (line {diag.line - fn_start_line + 1} of the function)"
    prompt = fill(
        templates.get("compile_fix"),
        ERROR_DESCRIPTION=diag.description,
        ERROR_SITE=site,
        FOCUS_SNIPPET=snippet.text,
    )
    sections = [prompt]
    if diag.rendered:
        sections.append("Compiler output:\n" + diag.rendered.rstrip())
    sections.append(
        "Changes made to the function since the rewrite began "
        "(unified diff, line numbers relative to the function):\n" + format_change_set(changes)
    )
    sections.append("Current function:\n" + current_fn)
    return "\n\n".join(sections)


def build_test_fix_prompt(
    exec_log: str,
    current_fn: str,
    start_line: int,
    original_fn: str,
    changes: ChangeSet,
    templates: Templates = DEFAULT,
) -> str:
    return fill(
        templates.get("test_fix"),
        EXEC_LOG=exec_log,
        START_LINE=str(start_line),
        REWRITTEN_CODE=current_fn,
        ORIGINAL_CODE=original_fn,
        DIFF_LOG=format_change_set(changes),
    )


# -- repair loops ----------------------------------------------------------

class PhaseClock:
    """Accumulates wall time per phase; nested phases pause their parent."""

    def __init__(self, clock: Callable[[], float] = time.monotonic):
        self.clock = clock
        self.totals: dict[str, float] = {}
        self._stack: list[tuple[str, float]] = []

    @contextmanager
    def phase(self, name: str):
        now = self.clock()
        if self._stack:
            parent, since = self._stack[-1]
            self.totals[parent] = self.totals.get(parent, 0.0) + now - since
        self._stack.append((name, now))
        try:
            yield
        finally:
            end = self.clock()
            _, since = self._stack.pop()
            self.totals[name] = self.totals.get(name, 0.0) + end - since
            if self._stack:
                parent, _ = self._stack[-1]
                self._stack[-1] = (parent, end)


@dataclass
class RepairSession:
    """Everything one pointer's repair needs. ``ask`` submits a prompt in the
    pointer's conversation; ``toolchain`` provides ``check`` and ``test``."""

    workspace: Workspace
    ask: Callable[[str, str], str]
    toolchain: object
    site: RawPointerSite
    decision: LiftDecision
    original: FunctionRecord
    baseline: frozenset
    budget: RepairBudget = field(default_factory=RepairBudget)
    committed_text: str | None = None
    snippet_radius: int = DEFAULT_RADIUS
    templates: Templates = DEFAULT
    timers: PhaseClock = field(default_factory=PhaseClock)
    deadline: float | None = None
    clock: Callable[[], float] = time.monotonic
    events: list[dict] = field(default_factory=list)
    reason: str = ""

    def __post_init__(self):
        if self.committed_text is None:
            self.committed_text = self.original.source_text

    def log(self, event: str, **data) -> None:
        self.events.append({"event": event, **data})

    def current_function(self) -> FunctionRecord:
        fn = self.workspace.function(self.original.key)
        if fn is None:
            raise LookupError(f"function {self.original.qualname} vanished from {self.original.file_path}")
        return fn

    def _may_attempt(self) -> bool:
        if self.deadline is not None and self.clock() > self.deadline:
            self.reason = "per-pointer time cap reached"
            return False
        if not self.budget.try_consume():
            self.reason = "repair budget exhausted"
            return False
        return True

    def _candidate(self, text: str, origin: str) -> RewriteCandidate:
        return RewriteCandidate(self.site, self.decision, text, origin)

    def replace_current(self, fn: FunctionRecord, new_text: str) -> None:
        apply_patch(self.workspace, Patch.replace_function(fn, new_text))


def compile_fix_loop(session: RepairSession, result: VerifyResult) -> str:
    with session.timers.phase("compile-fix"):
        while not result.compiled:
            if not session._may_attempt():
                return GAVE_UP
            fn = session.current_function()
            diag = select_target_error(result.diagnostics, fn)
            snippet = focus_snippet(fn.source_text, diag.line - fn.start_line + 1, session.snippet_radius)
            changes = compute_change_set(session.original.source_text, fn.source_text)
            prompt = build_compile_fix_prompt(
                diag, fn.source_text, snippet, changes, session.templates, fn.start_line
            )
            response = session.ask(prompt, "compile-fix")
            attempt = session.budget.used
            try:
                code = extract_code_block(response)
            except CannotFix:
                session.log("compile-fix-attempt", attempt=attempt, target=diag.location, result="cannot-fix")
                session.reason = "model answered CANNOT_FIX"
                return GAVE_UP
            except ExtractionError as exc:
                session.log("compile-fix-attempt", attempt=attempt, target=diag.location, result="no-code", detail=str(exc))
                continue
            if _full_function_reply(fn, code):
                new_text = code
            else:
                new_text = splice_snippet(fn.source_text, snippet, code)
            verdict = validate_rewrite(session.original, session._candidate(new_text, "compile-fix"))
            if not verdict.ok:
                session.log("compile-fix-attempt", attempt=attempt, target=diag.location, result="invalid", violations=verdict.violations)
                continue
            session.replace_current(fn, new_text)
            session.log("compile-fix-attempt", attempt=attempt, target=diag.location, result="applied")
            result = session.toolchain.check(session.workspace)
            session.log("compile-check", compiled=result.compiled, errors=len(result.diagnostics))
    return FIXED


def test_fix_loop(session: RepairSession, result: VerifyResult) -> str:
    with session.timers.phase("test-fix"):
        while not result.preserves(session.baseline):
            if not session._may_attempt():
                return GAVE_UP
            fn = session.current_function()
            changes = compute_change_set(session.committed_text, fn.source_text)
            prompt = build_test_fix_prompt(
                execution_log(result),
                fn.source_text,
                fn.start_line,
                session.original.source_text,
                changes,
                session.templates,
            )
            response = session.ask(prompt, "test-fix")
            attempt = session.budget.used
            try:
                code = extract_code_block(response)
            except CannotFix:
                session.log("test-fix-attempt", attempt=attempt, result="cannot-fix")
                session.reason = "model answered CANNOT_FIX"
                return GAVE_UP
            except ExtractionError as exc:
                session.log("test-fix-attempt", attempt=attempt, result="no-code", detail=str(exc))
                continue
            verdict = validate_rewrite(session.original, session._candidate(code, "test-fix"))
            if not verdict.ok:
                session.log("test-fix-attempt", attempt=attempt, result="invalid", violations=verdict.violations)
                continue
            session.replace_current(fn, code)
            session.log("test-fix-attempt", attempt=attempt, result="applied")
            check = session.toolchain.check(session.workspace)
            session.log("compile-check", compiled=check.compiled, errors=len(check.diagnostics))
            if not check.compiled and compile_fix_loop(session, check) == GAVE_UP:
                return GAVE_UP
            result = session.toolchain.test(session.workspace)
            session.log("test-run", preserved=result.preserves(session.baseline), failed=len(result.failures))
    return FIXED
