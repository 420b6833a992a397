import numpy as np
import pytest

from noran.rng import RngStream


@pytest.fixture
def rng():
    return RngStream(20240601)


def rayleigh(n_rx, n_tx, seed):
    """Channel draw from numpy's generator, independent of RngStream."""
    gen = np.random.default_rng(seed)
    return (gen.standard_normal((n_rx, n_tx)) + 1j * gen.standard_normal((n_rx, n_tx))) / np.sqrt(2)


# one PASS/FAIL line per acceptance criterion, printed after the run
_ACCEPTANCE = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    n, title = mark.args
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _ACCEPTANCE[n] = (title, "PASS" if rep.passed else "FAIL")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        title, verdict = _ACCEPTANCE[n]
        terminalreporter.write_line(f"{verdict}  criterion {n:2d}: {title}")
