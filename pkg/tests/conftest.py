import pytest

from sphereplate.materials import Drude, Plasma

# gold parameters shipped in data/gold.cfg
OMEGA_P = 1.37e16
GAMMA = 5.3e13
R_EXPT = 149.7e-6
T_ROOM = 295.25


@pytest.fixture(scope="session")
def gold_drude():
    return Drude(OMEGA_P, GAMMA)


@pytest.fixture(scope="session")
def gold_plasma():
    return Plasma(OMEGA_P)


# one line per acceptance criterion, repeated in the terminal summary so the
# report survives output capturing
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
