import json
from pathlib import Path

import numpy as np
import pytest

from tensegrity_shape.kinematics import ShapeState
from tensegrity_shape.model import builtin_prism
from tensegrity_shape.simulate import taut_spec

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def prism():
    return builtin_prism()


@pytest.fixture(scope="session")
def taut_prism():
    return taut_spec(builtin_prism())


@pytest.fixture(scope="session")
def frozen_equilibrium():
    """Oracle equilibrium of the taut prism, computed once and stored."""
    return json.loads((FIXTURES / "prism_taut_equilibrium.json").read_text())


@pytest.fixture(scope="session")
def equilibrium(frozen_equilibrium):
    d = frozen_equilibrium
    return ShapeState(np.array(d["centers"]), d["thetas"], d["phis"])


def random_state(rng, m_b=4, spread=0.3):
    return ShapeState(
        rng.uniform(-spread, spread, size=(m_b, 3)),
        rng.uniform(-np.pi, np.pi, size=m_b),
        rng.uniform(0.05, np.pi - 0.05, size=m_b),
    )


# --- acceptance summary -----------------------------------------------------
# Tests marked ``criterion(n, title)`` get one PASS/FAIL line each in the
# terminal summary.  A test adds detail text through the ``record`` fixture.

_CRITERIA: dict[str, list] = {}


def pytest_collection_modifyitems(items):
    for item in items:
        marker = item.get_closest_marker("criterion")
        if marker is not None:
            number, title = marker.args
            _CRITERIA[item.nodeid] = [number, title, "NOT RUN", ""]


def pytest_runtest_logreport(report):
    entry = _CRITERIA.get(report.nodeid)
    if entry is None:
        return
    if report.failed:
        entry[2] = "FAIL"
    elif report.when == "call":
        entry[2] = "PASS" if report.passed else "SKIP"
    details = [value for key, value in report.user_properties if key == "detail"]
    if details:
        entry[3] = "; ".join(details)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, status, detail in sorted(_CRITERIA.values()):
        line = f"criterion {number:>2}: {status:<4}  {title}"
        terminalreporter.write_line(line + (f"  ({detail})" if detail else ""))


@pytest.fixture
def record(request):
    def add(text: str):
        request.node.user_properties.append(("detail", text))
        print(text)

    return add
