"""Exception hierarchy for ptrlift."""

from __future__ import annotations


class PtrliftError(Exception):
    """Base class for every error raised by this package."""


class SourceReadError(PtrliftError, OSError):
    def __init__(self, path, reason: str):
        super().__init__(f"{path}: cannot read source file: {reason}")
        self.path = path


class SourceParseError(PtrliftError):
    def __init__(self, path, line: int, detail: str = "syntax error"):
        super().__init__(f"{path}:{line}: {detail}")
        self.path = path
        self.line = line


class ClassificationParseError(PtrliftError):
    """The model's lifting answer names none of the known outcomes."""


class IncompleteTraceError(PtrliftError):
    pass


class ExtractionError(PtrliftError):
    """No fenced Rust block in a model response."""


class CannotFix(PtrliftError):
    """The model answered CANNOT_FIX: stop trying on this pointer."""


class StalePatchError(PtrliftError):
    def __init__(self, path, start_line: int, end_line: int):
        super().__init__(
            f"{path}:{start_line}-{end_line}: file content no longer matches the patch's old text"
        )
        self.path = path


class ToolchainMissingError(PtrliftError, EnvironmentError):
    pass


class TransportError(PtrliftError):
    """Model endpoint unreachable or failing after all retries."""


class ReplayMiss(PtrliftError):
    def __init__(self, conversation_id: str, turn: int):
        super().__init__(
            f"replay script for conversation {conversation_id!r} has no assistant turn #{turn}"
        )
        self.conversation_id = conversation_id
        self.turn = turn


class ReplayLoadError(PtrliftError):
    def __init__(self, path, line: int, reason: str):
        super().__init__(f"{path}:{line}: malformed transcript record: {reason}")
        self.path = path
        self.line = line


class ConfigError(PtrliftError):
    pass


class SetupError(PtrliftError):
    """The pristine crate does not compile or its tests cannot be run."""
