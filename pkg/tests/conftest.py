import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_CRITERIA: dict = {}


@pytest.fixture
def criterion():
    """Record the outcome of an acceptance criterion: criterion(key, passed, detail)."""
    def record(key, passed, detail=""):
        _CRITERIA[str(key)] = (bool(passed), detail)
        return passed
    return record


def _order(key):
    head = key.rstrip("abcdefghij")
    return (int(head) if head.isdigit() else 99, key)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_CRITERIA, key=_order):
        ok, detail = _CRITERIA[key]
        terminalreporter.write_line(f"CRITERION {key}: {'PASS' if ok else 'FAIL'} {detail}".rstrip())
