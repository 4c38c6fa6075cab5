"""Statement refactoring: prompt construction, extraction of the rewritten
function from a response, structural validation, and patching it back."""

from __future__ import annotations

import hashlib
import json
import re
import shutil
from dataclasses import dataclass, field
from pathlib import Path

from .errors import CannotFix, ExtractionError, SourceParseError, StalePatchError
from .lifting import LeafKind, LiftDecision
from .source_index import (
    CrateIndex,
    FunctionRecord,
    PromptContext,
    RawPointerSite,
    count_local_raw_pointers,
    enumerate_raw_pointers,
    parse_function_text,
    parse_tree,
)
from .templates import DEFAULT, Templates, fill

CANNOT_FIX_TOKEN = "CANNOT_FIX"


def build_refactor_prompt(
    site: RawPointerSite,
    decision: LiftDecision,
    context: PromptContext,
    examples_text: str | None = None,
    templates: Templates = DEFAULT,
) -> str:
    if decision.kind is LeafKind.CANNOT_REWRITE:
        raise ValueError("no refactoring prompt for a CANNOT_REWRITE decision")
    if examples_text is None:
        examples_text = templates.example(decision.kind.value)
    return fill(
        templates.get("refactor"),
        FUNCTION_CONTEXT=site.function.source_text,
        POINTER_DECLARATION=site.decl_text,
        EXAMPLES=examples_text,
        STRUCTS_USED="\n\n".join(context.struct_definitions),
        STATICS_USED="\n".join(context.static_declarations),
    )


_TAGGED_FENCE = re.compile(r"```[ \t]*(?:rust|rs)\b[^\n]*\n(.*?)^[ \t]*```", re.DOTALL | re.MULTILINE)
_ANY_FENCE = re.compile(r"```[ \t]*\n(.*?)^[ \t]*```", re.DOTALL | re.MULTILINE)


def _trim_blank_lines(text: str) -> str:
    lines = text.split("\n")
    while lines and not lines[0].strip():
        lines.pop(0)
    while lines and not lines[-1].strip():
        lines.pop()
    return "\n".join(lines)


def extract_code_block(response: str) -> str:
    """Contents of the first ```rust fenced block (an untagged fence is the
    fallback). Raises CannotFix if the model gave up, ExtractionError if
    there is no block."""
    if CANNOT_FIX_TOKEN in response:
        raise CannotFix(CANNOT_FIX_TOKEN)
    m = _TAGGED_FENCE.search(response) or _ANY_FENCE.search(response)
    if m is None:
        raise ExtractionError("response contains no fenced code block")
    body = _trim_blank_lines(m.group(1))
    if not body.strip():
        raise ExtractionError("fenced code block is empty")
    return body


@dataclass
class RewriteCandidate:
    site: RawPointerSite
    decision: LiftDecision
    new_function_text: str
    origin: str = "initial-rewrite"  # or "compile-fix", "test-fix"


SIGNATURE_CHANGED = "signature changed"
USE_OUTSIDE = "use declaration outside the function"
POINTER_REMAINS = "raw declaration of the lifted pointer still present"
NEW_RAW_POINTERS = "new raw pointers introduced"
UNPARSEABLE = "candidate does not parse as one function"


@dataclass
class ValidationVerdict:
    violations: list[str] = field(default_factory=list)
    detail: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


_TOKEN = re.compile(r"\w+|\S")


def signature_tokens(signature_text: str) -> list[str]:
    return _TOKEN.findall(signature_text)


def _top_level_uses(text: str) -> list[str]:
    source = text.encode("utf-8")
    tree = parse_tree(source)
    return [
        source[n.start_byte:n.end_byte].decode("utf-8")
        for n in tree.root_node.named_children
        if n.type == "use_declaration"
    ]


def validate_rewrite(original: FunctionRecord, candidate: RewriteCandidate, check_pointer: bool = True) -> ValidationVerdict:
    verdict = ValidationVerdict()
    try:
        parsed = parse_function_text(candidate.new_function_text, original.file_path, original.start_line)
    except SourceParseError as exc:
        verdict.violations.append(UNPARSEABLE)
        verdict.detail.append(str(exc))
        return verdict

    if signature_tokens(parsed.signature_text) != signature_tokens(original.signature_text):
        verdict.violations.append(SIGNATURE_CHANGED)
        verdict.detail.append(f"expected {original.signature_text!r}, got {parsed.signature_text!r}")

    uses = _top_level_uses(candidate.new_function_text)
    if uses:
        verdict.violations.append(USE_OUTSIDE)
        verdict.detail.extend(uses)

    if check_pointer:
        name = candidate.site.name
        before = sum(1 for s in enumerate_raw_pointers(original) if s.name == name)
        after = sum(1 for s in enumerate_raw_pointers(parsed) if s.name == name)
        if after >= before:
            verdict.violations.append(POINTER_REMAINS)
        if count_local_raw_pointers(parsed) > count_local_raw_pointers(original) - 1:
            verdict.violations.append(NEW_RAW_POINTERS)
    return verdict


# -- workspace and patches -------------------------------------------------

_IGNORE = shutil.ignore_patterns("target", ".git")


class Workspace:
    """An isolated copy of the subject crate. Exactly one pipeline run owns a
    workspace at a time."""

    def __init__(self, root, journal_path=None):
        self.root = Path(root)
        self.journal_path = Path(journal_path) if journal_path else None
        self._index: CrateIndex | None = None

    @classmethod
    def create(cls, crate_root, dest, journal_path=None) -> "Workspace":
        dest = Path(dest)
        if dest.exists():
            raise FileExistsError(dest)
        shutil.copytree(crate_root, dest, ignore=_IGNORE)
        return cls(dest, journal_path)

    @property
    def index(self) -> CrateIndex:
        if self._index is None:
            self._index = CrateIndex(self.root)
        return self._index

    def invalidate(self) -> None:
        self._index = None

    def function(self, key) -> FunctionRecord | None:
        return self.index.find_function(key)

    def read_text(self, rel: str) -> str:
        return (self.root / rel).read_bytes().decode("utf-8")


@dataclass(frozen=True)
class Patch:
    file_path: str
    start_line: int
    end_line: int
    old_text: str
    new_text: str

    def inverse(self) -> "Patch":
        return Patch(self.file_path, self.start_line, self.new_end_line, self.new_text, self.old_text)

    @property
    def new_end_line(self) -> int:
        return self.start_line + self.new_text.count("\n")

    @classmethod
    def replace_function(cls, fn: FunctionRecord, new_text: str) -> "Patch":
        return cls(fn.file_path, fn.start_line, fn.end_line, fn.source_text, new_text)


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def apply_patch(workspace: Workspace, patch: Patch) -> int:
    """Replace the patch's line span and return the new end line.

    The span keeps its original line terminator. New text that ends in an
    empty line at an unterminated end of file is not line-addressable
    afterwards; extracted rewrites never end that way."""
    path = workspace.root / patch.file_path
    # an empty file still has one (empty) line that a patch can target
    lines = path.read_bytes().splitlines(keepends=True) or [b""]
    span = lines[patch.start_line - 1:patch.end_line]
    if patch.start_line < 1 or len(span) != patch.end_line - patch.start_line + 1:
        raise StalePatchError(patch.file_path, patch.start_line, patch.end_line)
    current = b"".join(span).decode("utf-8")
    terminator = ""
    for eol in ("\r\n", "\n"):
        if current.endswith(eol):
            terminator = eol
            current = current[: -len(eol)]
            break
    if current != patch.old_text:
        raise StalePatchError(patch.file_path, patch.start_line, patch.end_line)

    replacement = (patch.new_text + terminator).encode("utf-8")
    data = b"".join(lines[: patch.start_line - 1]) + replacement + b"".join(lines[patch.end_line:])
    path.write_bytes(data)
    if workspace._index is not None:
        workspace._index.reindex_file(patch.file_path)
    if workspace.journal_path is not None:
        record = {
            "file": patch.file_path,
            "start_line": patch.start_line,
            "end_line": patch.end_line,
            "new_end_line": patch.new_end_line,
            "old_sha256": _sha256(patch.old_text),
            "new_sha256": _sha256(patch.new_text),
        }
        with open(workspace.journal_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    return patch.new_end_line


def read_journal(path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        return []
    return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
