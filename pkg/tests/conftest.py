from __future__ import annotations

from importlib import resources
from pathlib import Path

import pytest

from jafun.frontend import load, parse_file, parse_program

FIXTURES = Path(str(resources.files("jafun") / "fixtures"))


def fixture_path(name: str) -> Path:
    return FIXTURES / name


def program(source: str):
    """Parse and load a source snippet."""
    return load(parse_program(source))


@pytest.fixture(scope="session")
def dlist():
    return load(parse_file(fixture_path("dlist.jf")))


@pytest.fixture(scope="session")
def npe_prog():
    return load(parse_file(fixture_path("npe.jf")))


ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
