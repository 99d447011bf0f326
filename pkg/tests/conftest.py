import numpy as np
import pytest
from hypothesis import settings

from colldeco.gasenv import GasParams

settings.register_profile("colldeco", max_examples=40, deadline=None)
settings.load_profile("colldeco")


@pytest.fixture
def unit_gas():
    return GasParams(mass=1.0, beta=1.0, density=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# acceptance criteria append (number, line) here; printed after the run
ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    def record(number: int, title: str, passed: bool, detail: str) -> bool:
        line = f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
        ACCEPTANCE_LINES.append((number, line))
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
