import pytest

from tlisim.params import CircuitParams
from tlisim.simulate import run
from tlisim.topology import TopologyKind

ALL_KINDS = tuple(TopologyKind)

_CRITERIA = []


@pytest.fixture(scope="session")
def default_params():
    return CircuitParams()


@pytest.fixture(scope="session")
def default_runs(default_params):
    """One 40-cycle run per topology at the default parameters."""
    return {kind: run(kind, default_params) for kind in ALL_KINDS}


@pytest.fixture(scope="session")
def short_params():
    return CircuitParams(n_cycles=8)


@pytest.fixture
def criterion():
    """Log one acceptance line; the summary is printed at the end of the run."""

    def record(number, title, passed, detail=""):
        _CRITERIA.append((number, title, bool(passed), detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(_CRITERIA, key=lambda c: c[0]):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {number:>4} {title}: {detail}")
