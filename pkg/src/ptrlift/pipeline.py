"""Project-level orchestration: snapshot, lift, refactor, verify, repair,
then commit or roll back, one pointer at a time."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import re
import shutil
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable

import yaml

from . import lifting
from .errors import (
    CannotFix,
    ClassificationParseError,
    ConfigError,
    ExtractionError,
    PtrliftError,
    SetupError,
    ToolchainMissingError,
    TransportError,
)
from .lifting import LeafKind, LiftDecision
from .llm import Gateway, PriceSheet, UsageRecord, cost
from .refactor import (
    Patch,
    RewriteCandidate,
    Workspace,
    apply_patch,
    build_refactor_prompt,
    extract_code_block,
    validate_rewrite,
)
from .repair import (
    FIXED,
    PhaseClock,
    RepairBudget,
    RepairSession,
    compile_fix_loop,
    test_fix_loop,
)
from .source_index import (
    RawPointerSite,
    collect_context,
    enumerate_raw_pointers,
    ineligibility_reason,
    unsupported_declarations,
)
from .templates import Templates
from .verify import DEFAULT_CHECK_COMMAND, DEFAULT_TEST_COMMAND, Toolchain, workspace_root

SCHEMA_VERSION = 1
RUN_MARKER = ".ptrlift-run"
EXCLUDED_DIRS = {"target", ".git"}

COMMITTED = "committed"
GAVE_UP = "gave-up"
INELIGIBLE = "ineligible"
PARSE_FAILED = "parse-failed"

LIFT_RETRY_PROMPT = (
    "Your answer did not name one of the 6 candidates. Reply with exactly one of "
    "the candidates, with ORIG_TY replaced by the pointee type, or CANNOT_REWRITE."
)
REWRITE_RETRY_PROMPT = (
    "Your answer did not contain the rewritten function. Reply with the complete "
    "rewritten function inside one ```rust code block."
)


# -- configuration ---------------------------------------------------------

@dataclass
class ProjectConfig:
    crate_root: Path
    test_command: str = DEFAULT_TEST_COMMAND
    type_check_command: str = DEFAULT_CHECK_COMMAND
    budget_limit: int = 5
    snippet_radius: int = 5
    model_id: str = "gpt-4o-mini"
    temperature: float = 0.0
    base_url: str = "https://api.openai.com/v1"
    api_key_env: str = "OPENAI_API_KEY"
    request_timeout: float = 120.0
    retries: int = 3
    compile_timeout: float = 600.0
    test_timeout: float = 600.0
    pointer_time_cap: float = 900.0
    workdir: Path = Path("ptrlift-run")
    report_path: Path = Path("ptrlift-report")
    formats: tuple = ("json", "csv")
    templates_dir: Path | None = None
    project_name: str | None = None
    input_rate: float = 0.150
    output_rate: float = 0.600

    def __post_init__(self):
        self.crate_root = Path(self.crate_root)
        self.workdir = Path(self.workdir)
        self.report_path = Path(self.report_path)
        if self.templates_dir is not None:
            self.templates_dir = Path(self.templates_dir)
        if isinstance(self.formats, str):
            self.formats = ("json", "csv") if self.formats == "both" else (self.formats,)
        self.formats = tuple(self.formats)
        if self.budget_limit < 1:
            raise ConfigError("budget_limit must be at least 1")
        if not str(self.test_command).strip() or not str(self.type_check_command).strip():
            raise ConfigError("test and type-check commands must be non-empty")
        if not set(self.formats) <= {"json", "csv"}:
            raise ConfigError(f"unknown report format in {self.formats}")
        if self.project_name is None:
            self.project_name = self.crate_root.resolve().name

    @property
    def prices(self) -> PriceSheet:
        return PriceSheet(self.input_rate, self.output_rate)

    @property
    def toolchain(self) -> Toolchain:
        return Toolchain(self.type_check_command, self.test_command, self.compile_timeout, self.test_timeout)

    @classmethod
    def from_mapping(cls, data: dict, **overrides) -> "ProjectConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        merged = {**data, **{k: v for k, v in overrides.items() if v is not None}}
        if "crate_root" not in merged:
            raise ConfigError("crate_root is required")
        return cls(**merged)

    @classmethod
    def load(cls, path, **overrides) -> "ProjectConfig":
        path = Path(path)
        try:
            data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a key-value document")
        base = path.parent
        for key in ("crate_root", "workdir", "report_path", "templates_dir"):
            if data.get(key) is not None and not Path(data[key]).is_absolute():
                data[key] = base / data[key]
        return cls.from_mapping(data, **overrides)


# -- snapshots -------------------------------------------------------------

def _sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def tracked_files(root: Path) -> list[str]:
    out = []
    for dirpath, dirnames, filenames in os.walk(root):
        rel_dir = Path(dirpath).relative_to(root)
        if rel_dir == Path("."):
            dirnames[:] = [d for d in dirnames if d not in EXCLUDED_DIRS]
        dirnames.sort()
        for name in sorted(filenames):
            out.append((rel_dir / name).as_posix())
    return sorted(out)


def tree_hashes(root) -> dict[str, str]:
    root = Path(root)
    return {rel: _sha256_bytes((root / rel).read_bytes()) for rel in tracked_files(root)}


@dataclass(frozen=True)
class Snapshot:
    identifier: str
    hashes: dict


class SnapshotStore:
    """Content-addressed copies of tracked files, kept in a run-local
    directory. Build output (``target/``) is never tracked."""

    def __init__(self, directory):
        self.directory = Path(directory)
        (self.directory / "objects").mkdir(parents=True, exist_ok=True)

    def _object(self, digest: str) -> Path:
        return self.directory / "objects" / digest

    def snapshot(self, workspace) -> Snapshot:
        root = workspace_root(workspace)
        hashes = {}
        for rel in tracked_files(root):
            data = (root / rel).read_bytes()
            digest = _sha256_bytes(data)
            obj = self._object(digest)
            if not obj.exists():
                obj.write_bytes(data)
            hashes[rel] = digest
        manifest = json.dumps(hashes, sort_keys=True).encode("utf-8")
        ident = _sha256_bytes(manifest)[:16]
        (self.directory / f"{ident}.json").write_bytes(manifest)
        return Snapshot(ident, hashes)

    def restore(self, workspace, snap: Snapshot) -> None:
        root = workspace_root(workspace)
        for rel in tracked_files(root):
            if rel not in snap.hashes:
                (root / rel).unlink()
        for rel, digest in snap.hashes.items():
            path = root / rel
            if path.exists() and _sha256_bytes(path.read_bytes()) == digest:
                continue
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(self._object(digest).read_bytes())
        if isinstance(workspace, Workspace):
            workspace.invalidate()


# -- report ----------------------------------------------------------------

@dataclass
class PointerRecord:
    pointer_id: str
    file_path: str
    function: str
    name: str
    decl_line: int
    pointee_type: str = ""
    decision: str | None = None
    target_type: str = ""
    outcome: str = INELIGIBLE
    attempts_used: int = 0
    reason: str = ""
    events: list = field(default_factory=list)


TABLE_COLUMNS = ["ID", "#ERP", "#AF", "RT(s)", "CFT(s)", "TFT(s)", "TotalT(s)", "#InTok", "#OutTok", "#P", "Cost($)"]


@dataclass
class RunReport:
    project: str
    pointers: list[PointerRecord] = field(default_factory=list)
    rewrite_time: float = 0.0
    compile_fix_time: float = 0.0
    test_fix_time: float = 0.0
    total_time: float = 0.0
    input_tokens: int = 0
    output_tokens: int = 0
    prompt_rounds: int = 0
    tokens_estimated: bool = False
    input_rate: float = 0.150
    output_rate: float = 0.600
    usage_by_phase: dict = field(default_factory=dict)
    baseline_tests: list = field(default_factory=list)
    final_compiles: bool | None = None
    final_preserves_baseline: bool | None = None
    timings_recorded: bool = True
    setup_error: str | None = None

    @property
    def committed(self) -> list[PointerRecord]:
        return [p for p in self.pointers if p.outcome == COMMITTED]

    @property
    def eliminated_pointer_count(self) -> int:
        return len(self.committed)

    @property
    def affected_function_count(self) -> int:
        return len({(p.file_path, p.function) for p in self.committed})

    @property
    def cost(self) -> float:
        usage = UsageRecord(self.input_tokens, self.output_tokens, self.prompt_rounds)
        return cost(usage, PriceSheet(self.input_rate, self.output_rate))

    def leaf_distribution(self) -> dict:
        counts: dict[str, int] = {}
        for p in self.committed:
            counts[p.decision] = counts.get(p.decision, 0) + 1
        total = sum(counts.values())
        order = [k.value for k in lifting.LEAVES]
        return {
            kind: {"count": counts[kind], "percent": round(100.0 * counts[kind] / total, 1)}
            for kind in order
            if kind in counts
        }

    def table_row(self) -> list[str]:
        return [
            self.project,
            str(self.eliminated_pointer_count),
            str(self.affected_function_count),
            f"{self.rewrite_time:.2f}",
            f"{self.compile_fix_time:.2f}",
            f"{self.test_fix_time:.2f}",
            f"{self.total_time:.2f}",
            str(self.input_tokens),
            str(self.output_tokens),
            str(self.prompt_rounds),
            f"{self.cost:.3f}",
        ]

    def to_dict(self) -> dict:
        data = asdict(self)
        data["schema_version"] = SCHEMA_VERSION
        data["eliminated_pointer_count"] = self.eliminated_pointer_count
        data["affected_function_count"] = self.affected_function_count
        data["cost"] = round(self.cost, 6)
        data["leaf_distribution"] = self.leaf_distribution()
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "RunReport":
        version = data.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema_version {version!r}")
        known = {f.name for f in fields(cls)}
        kwargs = {k: v for k, v in data.items() if k in known}
        kwargs["pointers"] = [PointerRecord(**p) for p in data.get("pointers", [])]
        return cls(**kwargs)


def render_json(report: RunReport) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"


def render_csv(report: RunReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TABLE_COLUMNS)
    writer.writerow(report.table_row())
    dist = report.leaf_distribution()
    if dist:
        writer.writerow([])
        writer.writerow(["leaf", "count", "percent"])
        for kind, entry in dist.items():
            writer.writerow([kind, entry["count"], f"{entry['percent']:.1f}"])
    return buf.getvalue()


def emit_report(report: RunReport, path_stem, formats=("json", "csv")) -> list[Path]:
    path_stem = Path(path_stem)
    if path_stem.suffix in (".json", ".csv"):
        path_stem = path_stem.with_suffix("")
    written = []
    try:
        path_stem.parent.mkdir(parents=True, exist_ok=True)
        for fmt in formats:
            path = path_stem.with_suffix(f".{fmt}")
            path.write_text(render_json(report) if fmt == "json" else render_csv(report), encoding="utf-8")
            written.append(path)
    except OSError:
        sys.stdout.write(render_json(report))
        raise
    return written


def load_report(path) -> RunReport:
    return RunReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# -- ledger ----------------------------------------------------------------

_EVENT_LETTERS = {
    ("lift-response", "ok"): "L",
    ("lift-response", "parse-failed"): "l",
    ("lift-response", "cannot-rewrite"): "C",
    ("rewrite-response", "ok"): "R",
    ("rewrite-response", "no-code"): "r",
    ("rewrite-response", "cannot-fix"): "r",
    ("validate-fail", None): "V",
    ("patch-applied", None): "P",
    ("compile-check", None): "K",
    ("compile-fix-attempt", None): "F",
    ("test-run", None): "T",
    ("test-fix-attempt", None): "X",
    ("commit", None): "M",
    ("give-up", None): "G",
}

_LEDGER = re.compile(r"l*(?:C|G|Lr*(?:G|R(?:VG|PK(?:FK?)*(?:G|T(?:X(?:K(?:FK?)*T?)?)*(?:M|G)))))")


def ledger_string(events: list[dict]) -> str:
    out = []
    for e in events:
        key = (e["event"], e.get("result")) if e["event"] in ("lift-response", "rewrite-response") else (e["event"], None)
        out.append(_EVENT_LETTERS[key])
    return "".join(out)


def ledger_is_valid(events: list[dict]) -> bool:
    """Check a pointer's events against the workflow's allowed transitions."""
    if not events:
        return True
    try:
        seq = ledger_string(events)
    except KeyError:
        return False
    if not _LEDGER.fullmatch(seq):
        return False
    if seq.endswith("M"):
        last = events[-2]
        return last["event"] == "test-run" and bool(last.get("preserved"))
    return True


# -- the run ---------------------------------------------------------------

def prepare_workdir(workdir: Path) -> Path:
    workdir = Path(workdir)
    if workdir.exists() and any(workdir.iterdir()):
        if not (workdir / RUN_MARKER).exists():
            raise ConfigError(f"refusing to reuse non-empty directory without {RUN_MARKER}: {workdir}")
        shutil.rmtree(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    (workdir / RUN_MARKER).write_text("ptrlift run directory\n", encoding="utf-8")
    return workdir


@dataclass
class _WorkItem:
    key: tuple
    name: str
    occurrence: int
    record: PointerRecord


class ProjectRun:
    def __init__(self, config: ProjectConfig, gateway: Gateway, clock: Callable[[], float] = time.monotonic, record_timings: bool = True):
        self.config = config
        self.gateway = gateway
        self.clock = clock
        self.record_timings = record_timings
        self.templates = Templates(config.templates_dir)
        self.toolchain = config.toolchain
        self.timers = PhaseClock(clock)
        self.report = RunReport(config.project_name, input_rate=config.input_rate, output_rate=config.output_rate)
        self.baseline: frozenset = frozenset()

    # transcripts: one file per round under transcripts/<pointer_id>/
    def _asker(self, conv, pointer_id: str):
        log_dir = self.run_dir / "transcripts" / pointer_id

        def ask(prompt: str, phase: str) -> str:
            response = self.gateway.submit(conv, prompt, project=self.config.project_name, pointer=pointer_id, phase=phase)
            log_dir.mkdir(parents=True, exist_ok=True)
            round_no = conv.assistant_turns
            usage = conv.turns[-1].usage
            (log_dir / f"round_{round_no:03d}.json").write_text(
                json.dumps(
                    {"phase": phase, "prompt": prompt, "response": response, "usage": asdict(usage) if usage else None},
                    indent=2,
                ),
                encoding="utf-8",
            )
            return response

        return ask

    def run(self) -> RunReport:
        start = self.clock()
        try:
            self._run()
        finally:
            self.report.total_time = self.clock() - start
            self._finish_usage()
            self._finish_timings()
        return self.report

    def _finish_usage(self) -> None:
        usage = self.gateway.usage_for(project=self.config.project_name)
        self.report.input_tokens = usage.input_tokens
        self.report.output_tokens = usage.output_tokens
        self.report.prompt_rounds = usage.rounds
        self.report.tokens_estimated = usage.estimated
        by_phase = {}
        for phase in ("rewrite", "compile-fix", "test-fix"):
            rec = self.gateway.usage_for(project=self.config.project_name, phase=phase)
            if rec.rounds:
                by_phase[phase] = {"input_tokens": rec.input_tokens, "output_tokens": rec.output_tokens, "rounds": rec.rounds}
        self.report.usage_by_phase = by_phase

    def _finish_timings(self) -> None:
        r = self.report
        r.rewrite_time = self.timers.totals.get("rewrite", 0.0)
        r.compile_fix_time = self.timers.totals.get("compile-fix", 0.0)
        r.test_fix_time = self.timers.totals.get("test-fix", 0.0)
        if not self.record_timings:
            measured = {"rewrite": r.rewrite_time, "compile-fix": r.compile_fix_time, "test-fix": r.test_fix_time, "total": r.total_time}
            (self.run_dir / "timings.json").write_text(json.dumps(measured, indent=2), encoding="utf-8")
            r.rewrite_time = r.compile_fix_time = r.test_fix_time = r.total_time = 0.0
            r.timings_recorded = False

    def _run(self) -> None:
        cfg = self.config
        self.run_dir = prepare_workdir(cfg.workdir)
        self.workspace = Workspace.create(cfg.crate_root, self.run_dir / "workspace", self.run_dir / "journal.jsonl")
        self.store = SnapshotStore(self.run_dir / "snapshots")

        try:
            items = self._worklist()
        except PtrliftError as exc:
            self.report.setup_error = f"indexing failed: {exc}"
            raise SetupError(self.report.setup_error) from exc
        check = self.toolchain.check(self.workspace)
        if not check.compiled:
            first = check.diagnostics[0]
            self.report.setup_error = f"pristine crate does not compile: {first.location}: {first.message}"
            raise SetupError(self.report.setup_error)
        tests = self.toolchain.test(self.workspace)
        if not tests.compiled or tests.timed_out:
            self.report.setup_error = "baseline test suite could not be run"
            raise SetupError(self.report.setup_error)
        self.baseline = tests.pass_set
        self.report.baseline_tests = sorted(self.baseline)

        eliminated: dict[tuple, int] = {}
        for item in items:
            if item.record.outcome != "pending":
                continue
            self._process(item, eliminated)

        final_check = self.toolchain.check(self.workspace)
        self.report.final_compiles = final_check.compiled
        final_tests = self.toolchain.test(self.workspace) if final_check.compiled else None
        self.report.final_preserves_baseline = bool(final_tests and final_tests.preserves(self.baseline))

    def _worklist(self) -> list[_WorkItem]:
        items = []
        for fn in self.workspace.index.functions:
            entries = []
            for site in enumerate_raw_pointers(fn):
                rec = PointerRecord(
                    site.pointer_id, fn.file_path, fn.qualname, site.name, site.decl_line, site.pointee_type,
                    outcome="pending",
                )
                reason = ineligibility_reason(site)
                if reason:
                    rec.outcome, rec.reason = INELIGIBLE, reason
                entries.append((site.decl_line, _WorkItem(fn.key, site.name, site.occurrence, rec)))
            for decl in unsupported_declarations(fn):
                rec = PointerRecord(
                    f"{fn.file_path.replace('/', '_')}__{fn.qualname.replace('::', '.')}__L{decl.line}",
                    fn.file_path, fn.qualname, "", decl.line, outcome=INELIGIBLE, reason=decl.reason,
                )
                entries.append((decl.line, _WorkItem(fn.key, "", -1, rec)))
            entries.sort(key=lambda e: e[0])
            items.extend(e[1] for e in entries)
        self.report.pointers = [i.record for i in items]
        return items

    def _locate(self, item: _WorkItem, eliminated: dict) -> RawPointerSite | None:
        fn = self.workspace.function(item.key)
        if fn is None:
            return None
        same = [s for s in enumerate_raw_pointers(fn) if s.name == item.name]
        idx = item.occurrence - eliminated.get((item.key, item.name), 0)
        if not 0 <= idx < len(same):
            return None
        return same[idx]

    def _process(self, item: _WorkItem, eliminated: dict) -> None:
        rec = item.record
        site = self._locate(item, eliminated)
        if site is None:
            rec.outcome, rec.reason = INELIGIBLE, "declaration no longer present"
            return
        rec.decl_line = site.decl_line

        snap = self.store.snapshot(self.workspace)
        conv = self.gateway.conversation(rec.pointer_id)
        ask = self._asker(conv, rec.pointer_id)
        budget = RepairBudget(self.config.budget_limit)
        events: list[dict] = []
        rec.events = events
        deadline = self.clock() + self.config.pointer_time_cap

        def give_up(outcome: str, reason: str) -> None:
            events.append({"event": "give-up", "reason": reason})
            rec.outcome, rec.reason = outcome, reason
            self.store.restore(self.workspace, snap)
            after = tree_hashes(self.workspace.root)
            if after != snap.hashes:
                raise RuntimeError(f"rollback of {rec.pointer_id} left the workspace modified")

        try:
            outcome = self._lift_and_repair(site, rec, ask, budget, events, deadline)
        except (TransportError, ToolchainMissingError) as exc:
            give_up(GAVE_UP, f"run aborted: {exc}")
            rec.attempts_used = budget.used
            raise
        except (PtrliftError, LookupError) as exc:
            outcome = (GAVE_UP, f"{type(exc).__name__}: {exc}")
        rec.attempts_used = budget.used

        if outcome is None:
            events.append({"event": "commit"})
            rec.outcome, rec.reason = COMMITTED, ""
            key = (item.key, item.name)
            eliminated[key] = eliminated.get(key, 0) + 1
        elif outcome[0] == INELIGIBLE:
            rec.outcome, rec.reason = outcome
        else:
            give_up(*outcome)

    def _lift_and_repair(self, site, rec, ask, budget, events, deadline):
        """Returns None on success, else (outcome, reason)."""
        fn = site.function
        with self.timers.phase("rewrite"):
            decision = None
            prompt = lifting.build_lifting_prompt(site, self.templates)
            first = True
            while decision is None:
                if not first and not budget.try_consume():
                    return PARSE_FAILED, "lifting answer never parsed within budget"
                first = False
                response = ask(prompt, "rewrite")
                try:
                    decision = lifting.parse_decision(response, site)
                except ClassificationParseError as exc:
                    events.append({"event": "lift-response", "result": "parse-failed", "detail": str(exc)})
                    prompt = LIFT_RETRY_PROMPT
            rec.decision = decision.kind.value
            rec.target_type = decision.target_type_text
            if decision.kind is LeafKind.CANNOT_REWRITE:
                events.append({"event": "lift-response", "result": "cannot-rewrite"})
                return INELIGIBLE, "model answered CANNOT_REWRITE"
            events.append({"event": "lift-response", "result": "ok", "decision": decision.kind.value})

            context = collect_context(fn, self.workspace.index)
            prompt = build_refactor_prompt(site, decision, context, templates=self.templates)
            first = True
            code = None
            while code is None:
                if not first and not budget.try_consume():
                    return GAVE_UP, "no rewritten function within budget"
                first = False
                response = ask(prompt, "rewrite")
                try:
                    code = extract_code_block(response)
                except CannotFix:
                    events.append({"event": "rewrite-response", "result": "cannot-fix"})
                    return GAVE_UP, "model answered CANNOT_FIX"
                except ExtractionError as exc:
                    events.append({"event": "rewrite-response", "result": "no-code", "detail": str(exc)})
                    prompt = REWRITE_RETRY_PROMPT
            events.append({"event": "rewrite-response", "result": "ok"})

            verdict = validate_rewrite(fn, RewriteCandidate(site, decision, code, "initial-rewrite"))
            if not verdict.ok:
                events.append({"event": "validate-fail", "violations": verdict.violations})
                return GAVE_UP, "rewrite rejected: " + "; ".join(verdict.violations)
            apply_patch(self.workspace, Patch.replace_function(fn, code))
            events.append({"event": "patch-applied"})
        with self.timers.phase("compile-fix"):
            check = self.toolchain.check(self.workspace)
            events.append({"event": "compile-check", "compiled": check.compiled, "errors": len(check.diagnostics)})

        session = RepairSession(
            workspace=self.workspace,
            ask=ask,
            toolchain=self.toolchain,
            site=site,
            decision=decision,
            original=fn,
            baseline=self.baseline,
            budget=budget,
            snippet_radius=self.config.snippet_radius,
            templates=self.templates,
            timers=self.timers,
            deadline=deadline,
            clock=self.clock,
            events=events,
        )
        if compile_fix_loop(session, check) != FIXED:
            return GAVE_UP, session.reason
        with self.timers.phase("test-fix"):
            tests = self.toolchain.test(self.workspace)
        events.append({"event": "test-run", "preserved": tests.preserves(self.baseline), "failed": len(tests.failures)})
        if test_fix_loop(session, tests) != FIXED:
            return GAVE_UP, session.reason
        return None


def run_project(config: ProjectConfig, gateway: Gateway, clock: Callable[[], float] = time.monotonic, record_timings: bool = True) -> RunReport:
    """Run the whole workflow. On a setup failure, raises SetupError; the
    partially filled report is available as ``exc.report``."""
    run = ProjectRun(config, gateway, clock, record_timings)
    try:
        return run.run()
    except SetupError as exc:
        exc.report = run.report
        raise
