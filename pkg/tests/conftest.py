import numpy as np
import pytest

from tdlescan.detector import calibrate_threshold, collect_incoherent
from tdlescan.model import RunOptions

_criteria = {}

CALIBRATION_ALPHAS = np.round(np.arange(0.1, 3.01, 0.3), 2)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _criteria[number] = (title, report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, outcome = _criteria[number]
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {number:>2} {verdict}  {title}")


@pytest.fixture(scope="session")
def calibration_runs():
    """Gap series of 4-node runs across both radii and an alpha grid (incoherent ones)."""
    series = collect_incoherent(4, CALIBRATION_ALPHAS, 48, seed=2024, opts=RunOptions())
    kept = np.vstack([s.gaps for s in series if s.incoherent])
    assert kept.shape[0] >= 12
    return kept


@pytest.fixture(scope="session")
def thresholds(calibration_runs):
    return {p: calibrate_threshold(calibration_runs, p) for p in (90.0, 92.5, 95.0)}
