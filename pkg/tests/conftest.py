from pathlib import Path

import pytest

from cgfeedback.backend import MiniBackend

FIXTURES = Path(__file__).parent / "fixtures"

_acceptance_key = pytest.StashKey[list]()


def fixture_text(name: str) -> str:
    return (FIXTURES / name).read_text()


@pytest.fixture
def backend():
    return MiniBackend()


@pytest.fixture
def diamond():
    return fixture_text("diamond.mir")


@pytest.fixture
def witness():
    return fixture_text("witness.mir")


def pytest_configure(config):
    config.stash[_acceptance_key] = []


@pytest.fixture
def record_criterion(request):
    """Log a one-line pass/fail verdict for an acceptance criterion."""
    lines = request.config.stash[_acceptance_key]

    def record(number: int, ok: bool, detail: str):
        lines.append((number, ok, detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_acceptance_key, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, detail in sorted(lines):
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
