import pytest

from crhyp import EvalContext

ACCEPTANCE_LINES = []


@pytest.fixture
def ctx1():
    return EvalContext(1)


@pytest.fixture
def ctx2():
    return EvalContext(2)


@pytest.fixture
def record():
    def add(line):
        ACCEPTANCE_LINES.append(line)
        print(line)
    return add


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
