from __future__ import annotations

import sys
from pathlib import Path

import pytest

HERE = Path(__file__).resolve().parent
ROOT = HERE.parent
SAMPLES = ROOT / "samples" / "aircraft"

sys.path.insert(0, str(HERE))

from fomforge.document import parse_module  # noqa: E402

# acceptance tests append (criterion, passed, detail) here; printed at the end
ACCEPTANCE_LINES: list[tuple[str, bool, str]] = []


@pytest.fixture(scope="session")
def samples_dir() -> Path:
    return SAMPLES


@pytest.fixture(scope="session")
def module1():
    return parse_module((SAMPLES / "module1.fmod").read_bytes())


@pytest.fixture(scope="session")
def module2():
    return parse_module((SAMPLES / "module2.fmod").read_bytes())


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in ACCEPTANCE_LINES:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
