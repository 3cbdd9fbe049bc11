import os
from pathlib import Path

# sharded training must see real concurrency even on a single-core runner
os.environ.setdefault("NUMBA_NUM_THREADS", "4")

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ROOT = Path(__file__).resolve().parent.parent
BUNDLE = ROOT / "fixtures" / "bundle"

# filled by tests/test_acceptance.py, printed after the run
ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def bundle() -> Path:
    return BUNDLE


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
