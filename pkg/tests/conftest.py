import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

import monitors  # noqa: E402

monitors.install()

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def acc4():
    from dira.lha import generate_acc
    return generate_acc(4)


@pytest.fixture(scope="session")
def acc4_unsafe():
    from dira.lha import generate_acc
    return generate_acc(4, unsafe=True)


_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def acceptance_record():
    def record(number, title, ok, detail):
        _ACCEPTANCE[number] = f"criterion {number} {title:<26} {'PASS' if ok else 'FAIL'}  {detail}"
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[k])
        c = monitors.COUNTERS
        terminalreporter.write_line(
            f"session monitors: {c.iis_checked} IIS irreducible, {c.continues_checked} continue decisions "
            f"({c.multi_select_checked} multi-selection) non-redundant, {c.rounds_bounded} rounds within "
            f"the byte bound")
