import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("pot1d", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "pot1d"))

_CRITERIA = {}


@pytest.fixture
def criterion():
    """Record one acceptance verdict; all verdicts are echoed in the terminal summary."""

    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
        _CRITERIA.setdefault(number, []).append((ok, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        for _, line in _CRITERIA[n]:
            terminalreporter.write_line(line)
