import time

import pytest

SESSION = {"start": None, "lines": []}


def pytest_sessionstart(session):
    SESSION["start"] = time.perf_counter()


def pytest_collection_modifyitems(session, config, items):
    # the whole-suite timing check must run after everything else
    last = [it for it in items if it.name == "test_criterion_10_suite_time"]
    items[:] = [it for it in items if it not in last] + last


def pytest_terminal_summary(terminalreporter):
    if SESSION["lines"]:
        terminalreporter.section("acceptance criteria")
        for line in SESSION["lines"]:
            terminalreporter.write_line(line)


@pytest.fixture
def report():
    """Print one PASS/FAIL line and keep it for the terminal summary."""
    def emit(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        print(line)
        SESSION["lines"].append(line)
        return ok
    return emit


@pytest.fixture
def session_start():
    return SESSION["start"]
