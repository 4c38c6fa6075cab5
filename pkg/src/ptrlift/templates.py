"""Prompt templates with ``#PLACEHOLDER#`` markers.

Built-in copies ship with the package; a directory holding files of the same
names overrides them one file at a time.
"""

from __future__ import annotations

import re
from importlib import resources
from pathlib import Path

PLACEHOLDER = re.compile(r"#([A-Z][A-Z_]*[A-Z])#")

NAMES = ("lifting", "refactor", "compile_fix", "test_fix")


class Templates:
    def __init__(self, directory=None):
        self.directory = Path(directory) if directory else None
        self._cache: dict[str, str] = {}

    def _read(self, relname: str) -> str | None:
        if self.directory is not None:
            override = self.directory / relname
            if override.is_file():
                return override.read_text(encoding="utf-8")
        res = resources.files("ptrlift").joinpath("templates", *relname.split("/"))
        if res.is_file():
            return res.read_text(encoding="utf-8")
        return None

    def get(self, name: str) -> str:
        if name not in self._cache:
            text = self._read(f"{name}.txt")
            if text is None:
                raise KeyError(f"no template named {name!r}")
            self._cache[name] = text.rstrip("\n")
        return self._cache[name]

    def example(self, kind_name: str) -> str:
        text = self._read(f"examples/{kind_name}.txt")
        return "" if text is None else text.rstrip("\n")


DEFAULT = Templates()


def fill(template: str, **values: str) -> str:
    """Substitute every placeholder in one pass, so inserted text (which may
    itself contain ``#...#``) is never re-expanded."""

    def repl(m: re.Match) -> str:
        key = m.group(1)
        if key not in values:
            raise KeyError(f"template placeholder #{key}# has no value")
        return values[key]

    missing = set(values) - set(PLACEHOLDER.findall(template))
    if missing:
        raise KeyError(f"values given for absent placeholders: {sorted(missing)}")
    return PLACEHOLDER.sub(repl, template)
