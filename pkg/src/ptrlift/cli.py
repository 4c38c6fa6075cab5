"""Command-line entry point: ``ptrlift scan|run|replay|report``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import ConfigError, PtrliftError, SetupError, ToolchainMissingError
from .llm import ChatCompletionsBackend, Gateway, load_replay
from .pipeline import ProjectConfig, emit_report, load_report, render_csv, render_json, run_project
from .source_index import CrateIndex, enumerate_raw_pointers, ineligibility_reason, unsupported_declarations

log = logging.getLogger("ptrlift")

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


def _add_project_flags(p: argparse.ArgumentParser, replay_required: bool = False) -> None:
    p.add_argument("--config", type=Path, help="YAML file mirroring the project configuration")
    p.add_argument("--crate", type=Path, help="crate root (overrides the config file)")
    p.add_argument("--budget", type=int, help="repair attempts per pointer (default 5)")
    p.add_argument("--replay", type=Path, required=replay_required, help="directory of recorded transcripts")
    p.add_argument("--record", type=Path, help="write each conversation's transcript here")
    p.add_argument("--report", type=Path, help="report path without extension")
    p.add_argument("--format", choices=["json", "csv", "both"], help="report formats (default both)")
    p.add_argument("--timeout-compile", type=float, help="seconds allowed for one type check")
    p.add_argument("--timeout-test", type=float, help="seconds allowed for one test run")
    p.add_argument("--workdir", type=Path, help="run directory (workspace copy, snapshots, transcripts)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ptrlift", description="Lift local raw pointers in transpiled Rust to safe types.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    scan = sub.add_parser("scan", help="list raw-pointer sites and their eligibility")
    scan.add_argument("--config", type=Path)
    scan.add_argument("--crate", type=Path)

    _add_project_flags(sub.add_parser("run", help="run the full pipeline against a live model"))
    _add_project_flags(sub.add_parser("replay", help="run the pipeline against recorded transcripts"), replay_required=True)

    report = sub.add_parser("report", help="re-render a saved JSON report")
    report.add_argument("--report", type=Path, required=True, help="saved report (.json)")
    report.add_argument("--format", choices=["json", "csv"], default="csv")
    return parser


def _config(args) -> ProjectConfig:
    overrides = {
        "crate_root": args.crate,
        "budget_limit": getattr(args, "budget", None),
        "report_path": getattr(args, "report", None),
        "formats": getattr(args, "format", None),
        "compile_timeout": getattr(args, "timeout_compile", None),
        "test_timeout": getattr(args, "timeout_test", None),
        "workdir": getattr(args, "workdir", None),
    }
    if args.config is not None:
        return ProjectConfig.load(args.config, **overrides)
    if args.crate is None:
        raise ConfigError("either --config or --crate is required")
    return ProjectConfig.from_mapping({}, **overrides)


def cmd_scan(args) -> int:
    cfg = _config(args)
    index = CrateIndex(cfg.crate_root)
    eligible = total = 0
    for fn in index.functions:
        for site in enumerate_raw_pointers(fn):
            total += 1
            reason = ineligibility_reason(site)
            eligible += reason is None
            status = "eligible" if reason is None else f"ineligible ({reason})"
            print(f"{fn.file_path}:{site.decl_line}\t{fn.qualname}\t{site.name}: {site.pointer_type_text}\t{status}")
        for decl in unsupported_declarations(fn):
            total += 1
            print(f"{fn.file_path}:{decl.line}\t{fn.qualname}\t{decl.text.strip()}\tineligible ({decl.reason})")
    print(f"{eligible} eligible of {total} raw-pointer sites")
    return EXIT_OK


def _gateway(args, cfg: ProjectConfig) -> tuple[Gateway, bool]:
    if args.replay is not None:
        backend = load_replay(args.replay)
        replaying = True
    else:
        backend = ChatCompletionsBackend(
            cfg.base_url, api_key_env=cfg.api_key_env, timeout=cfg.request_timeout, retries=cfg.retries
        )
        replaying = False
    return Gateway(backend, cfg.model_id, cfg.temperature, record_dir=args.record), replaying


def cmd_run(args) -> int:
    cfg = _config(args)
    gateway, replaying = _gateway(args, cfg)
    try:
        report = run_project(cfg, gateway, record_timings=not replaying)
    except SetupError as exc:
        print(f"ptrlift: setup error: {exc}", file=sys.stderr)
        stub = getattr(exc, "report", None)
        if stub is not None:
            emit_report(stub, cfg.report_path, cfg.formats)
        return EXIT_FAILURE
    for path in emit_report(report, cfg.report_path, cfg.formats):
        log.info("wrote %s", path)
    sys.stdout.write(render_csv(report))
    return EXIT_OK


def cmd_report(args) -> int:
    report = load_report(args.report)
    sys.stdout.write(render_json(report) if args.format == "json" else render_csv(report))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    handlers = {"scan": cmd_scan, "run": cmd_run, "replay": cmd_run, "report": cmd_report}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"ptrlift: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ToolchainMissingError as exc:
        print(f"ptrlift: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except (PtrliftError, OSError, ValueError) as exc:
        print(f"ptrlift: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
