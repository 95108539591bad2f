from __future__ import annotations

import pytest

from support import catalog, fixture

from atsg.pipeline import compile_manual


@pytest.fixture(scope="session")
def chair():
    return catalog("chair.toml")


@pytest.fixture(scope="session")
def chair_series():
    return fixture("chair")[1]


@pytest.fixture(scope="session")
def chair_result(chair, chair_series):
    return compile_manual(chair_series, chair)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import REPORT
    except ImportError:
        return
    if REPORT:
        terminalreporter.section("acceptance criteria")
        for line in REPORT:
            terminalreporter.write_line(line)
