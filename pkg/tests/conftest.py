import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from helpers import planted_world  # noqa: E402

_CRITERION_RESULTS: list[tuple[str, str, bool]] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when != "call":
        return
    if item.module.__name__ == "test_acceptance" and item.name.startswith(
        "test_criterion"
    ):
        doc = (item.function.__doc__ or item.name).strip().splitlines()[0]
        _CRITERION_RESULTS.append((item.name, doc, report.passed))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERION_RESULTS:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, doc, passed in sorted(_CRITERION_RESULTS):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {name}: {doc}")


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture(scope="session")
def world():
    """Single-instance planted retrieval problem (shared, read-only)."""
    return planted_world()


@pytest.fixture(scope="session")
def world3():
    """Three-instance variant for macro-metric and manifest tests."""
    return planted_world(n_instances=3, n_pos=4, n_vis=10, n_txt=10, seed=11)
