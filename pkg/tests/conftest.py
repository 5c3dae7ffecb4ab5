import pytest

from ctc.state import trivial_model
from helpers import two_state_model


@pytest.fixture
def two_state():
    return two_state_model()


@pytest.fixture
def trivial():
    return trivial_model()


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import VERDICTS
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(VERDICTS):
            terminalreporter.write_line(VERDICTS[n])
