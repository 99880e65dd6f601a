import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=300, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# filled through the ``criterion`` fixture, printed after the run
CRITERIA: dict[int, str] = {}


@pytest.fixture
def criterion():
    """``record(number, title, ok, detail)`` stores one pass/fail line."""

    def record(number: int, title: str, ok: bool, detail: str = "") -> bool:
        status = "PASS" if ok else "FAIL"
        CRITERIA[number] = f"criterion {number:>2} {status}  {title}" + (f"  ({detail})" if detail else "")
        print(CRITERIA[number])
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        terminalreporter.write_line(CRITERIA[number])
