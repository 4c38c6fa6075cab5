"""Lift local raw pointers in C2Rust-style Rust to safe types, repairing the
result with compiler and test feedback."""

from .lifting import LeafKind, LiftDecision
from .llm import Gateway, ReplayBackend, load_replay
from .pipeline import ProjectConfig, RunReport, emit_report, run_project
from .source_index import CrateIndex, FunctionRecord, RawPointerSite, index_crate

__version__ = "0.1.0"

__all__ = [
    "CrateIndex",
    "FunctionRecord",
    "Gateway",
    "LeafKind",
    "LiftDecision",
    "ProjectConfig",
    "RawPointerSite",
    "ReplayBackend",
    "RunReport",
    "emit_report",
    "index_crate",
    "load_replay",
    "run_project",
]
