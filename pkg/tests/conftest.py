import json
import pathlib

import numpy as np
import pytest

from qubo_forge.graph import load_graph

DATA = pathlib.Path(__file__).parent / "data"

_criteria = {}


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def g1():
    return load_graph(DATA / "g1.tsp")


@pytest.fixture(scope="session")
def goldens():
    raw = json.loads((DATA / "g1_matrices.json").read_text())
    return {k: np.array(v) for k, v in raw.items()}


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.when not in ("setup", "call"):
        return
    number, title = mark.args
    entry = _criteria.setdefault(number, {"title": title, "passed": True, "seconds": 0.0})
    if report.failed:
        entry["passed"] = False
    if report.when == "call":
        entry["seconds"] += report.duration


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        e = _criteria[number]
        status = "PASS" if e["passed"] else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {status} ({e['seconds']:.2f} s) {e['title']}")
