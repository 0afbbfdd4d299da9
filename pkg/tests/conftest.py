import pytest
from hypothesis import settings

from covol.coefficients import CoefficientSpec, Tabulated

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")

_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_log():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def unit_independent():
    return CoefficientSpec.constant(1.0, 1.0, 0.0)


@pytest.fixture
def unit_half():
    return CoefficientSpec.constant(1.0, 1.0, 0.5)


@pytest.fixture
def varying():
    """Piecewise-linear volatilities and correlation."""
    return CoefficientSpec(Tabulated((1.0, 1.5, 2.0)), Tabulated((0.8, 1.2)), Tabulated((-0.3, 0.2, 0.6)))
