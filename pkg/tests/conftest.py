from __future__ import annotations

from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"

_acceptance_outcomes: dict[str, str] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when == "call" and item.fspath.basename == "test_acceptance.py":
        _acceptance_outcomes[item.name] = report.outcome
    elif (report.when == "setup" and report.skipped
          and item.fspath.basename == "test_acceptance.py"):
        _acceptance_outcomes[item.name] = "skipped"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_outcomes:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    labels = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}
    for name in sorted(_acceptance_outcomes):
        outcome = _acceptance_outcomes[name]
        terminalreporter.write_line(f"{labels.get(outcome, outcome.upper())}  {name}")


@pytest.fixture
def fixtures() -> Path:
    return FIXTURES


def fixture_path(name: str) -> Path:
    return FIXTURES / name


def fixture_bytes(name: str) -> bytes:
    return fixture_path(name).read_bytes()


def fixture_text(name: str) -> str:
    return fixture_path(name).read_text(encoding="utf-8")
