import shutil
from pathlib import Path

import pytest

FIXTURES = Path(__file__).resolve().parent / "fixtures"

needs_cargo = pytest.mark.skipif(shutil.which("cargo") is None, reason="cargo not on PATH")


@pytest.fixture
def crate_copy(tmp_path):
    """Copy a fixture crate (without build output) into a fresh directory."""

    def copy(name: str) -> Path:
        dest = tmp_path / name
        shutil.copytree(FIXTURES / name, dest, ignore=shutil.ignore_patterns("target"))
        return dest

    return copy
