import warnings

import pytest

from pulsepair.geometry import ObservatoryConfig

# The site longitude is a configuration entry; tests use a fixed mid-latitude
# value so the LST oracles below are reproducible.
SITE_LON = -79.84
SITE_LAT = 38.43


@pytest.fixture
def obs():
    return ObservatoryConfig(SITE_LON, SITE_LAT)


@pytest.fixture
def obs_no_delay():
    return ObservatoryConfig(SITE_LON, SITE_LAT, instrumental_delay=0.0)


def pytest_configure(config):
    warnings.filterwarnings("error", category=RuntimeWarning, module="pulsepair")


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
