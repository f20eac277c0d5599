from pathlib import Path
import sys

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pathgraph.graph import Graph  # noqa: E402
from pathgraph.optimize import ExperimentSpec  # noqa: E402
from pathgraph.states import LocationLayout, ghz_state  # noqa: E402

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def bell_graph():
    # paths a, b, c, d -> 0, 1, 2, 3
    return Graph(4, 2, [(0, 2, 1, 0), (1, 3, 1, 0), (0, 3, 0, 0), (1, 2, 0, 0)])


@pytest.fixture
def bell_spec():
    layout = LocationLayout({"A": [0], "B": [1]}, [2, 3])
    return ExperimentSpec(layout, (2, 2, 2, 2), ghz_state(2))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
