import math

import pytest
from hypothesis import settings

from scalarqve import FieldConfig

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

SQRT2 = math.sqrt(2.0)


def slow_pulse(delta=0.0, omega=0.1):
    return FieldConfig.single(0.1 * SQRT2, delta, omega, 100.0)


def pulse_pair(delta2):
    return FieldConfig.two_pulse(0.1 * SQRT2, 0.1 * SQRT2, 1.0, delta2, 0.6, 0.6, 10.0, 100.0)


def short_field(delta=0.5, omega=0.6, E01=0.2, tau=8.0, phase=0.0):
    """Cheap few-cycle pulse for unit tests."""
    return FieldConfig.single(E01, delta, omega, tau, 0.0, phase)


@pytest.fixture
def short():
    return short_field()


ACCEPTANCE = {}


def record_criterion(number, title, passed, detail):
    """Remember one acceptance line and echo it immediately."""
    line = f"CRITERION {number:2d} {'PASS' if passed else 'FAIL'}: {title} ({detail})"
    ACCEPTANCE[number] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
