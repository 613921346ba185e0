import pytest

from willmore_ch.layers import LayerProfiles
from willmore_ch.phibar import PhiBar


@pytest.fixture(scope="session")
def profiles():
    return LayerProfiles()


@pytest.fixture(scope="session")
def phibar():
    return PhiBar()


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
