"""Shared fixtures: acceptance-criterion recording and suite timing.

The acceptance module runs last so its wall-clock criterion covers the whole
suite; every criterion prints one PASS/FAIL line in the terminal summary.
"""

import time

import pytest

_SESSION_START = time.monotonic()
_CRITERIA: dict = {}


def pytest_collection_modifyitems(config, items):
    items.sort(key=lambda it: it.fspath.basename == "test_acceptance.py")


@pytest.fixture(scope="session")
def suite_start():
    return _SESSION_START


@pytest.fixture
def record_criterion():
    def _record(number, passed, detail=""):
        _CRITERIA[number] = (bool(passed), detail)
    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k in sorted(_CRITERIA):
        passed, detail = _CRITERIA[k]
        word = "PASS" if passed else "FAIL"
        line = "CRITERION %d: %s" % (k, word)
        if detail:
            line += " - %s" % detail
        tr.write_line(line, green=passed, red=not passed)
    tr.write_line("suite wall-clock: %.2f s" % (time.monotonic() - _SESSION_START))
