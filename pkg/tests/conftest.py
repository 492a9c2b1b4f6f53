"""Session-wide fixtures: cached preset runs and the acceptance report."""

from __future__ import annotations

import pytest

import combcool.scenarios as sc

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def preset_runs():
    """Run each named preset at most once per session and cache the result."""
    cache = {}

    def get(name: str):
        if name not in cache:
            cache[name] = sc.run_preset(sc.get_preset(name))
        return cache[name]

    return get


@pytest.fixture(scope="session")
def acceptance_report() -> list[str]:
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
