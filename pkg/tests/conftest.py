import numpy as np
import pytest

from sceneprior.knowledge import load_shipped_graph
from sceneprior.worldgen import default_params, generate_corpus


@pytest.fixture(scope="session")
def kg():
    return load_shipped_graph()


@pytest.fixture(scope="session")
def small_corpus(kg):
    return generate_corpus(11, 10, default_params(kg))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, title = mark.args
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        ok = rep.outcome == "passed"
        seconds = getattr(rep, "duration", 0.0)
        _CRITERIA[n] = (title, ok and _CRITERIA.get(n, (None, True))[1], seconds)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, ok, seconds = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}  ({seconds:.1f}s)")
