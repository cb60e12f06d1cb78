import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import pytest

from qaoaml.dataset import build_dataset, split_dataset
from qaoaml.graphs import generate_graphs


@pytest.fixture(scope="session")
def small_dataset():
    """Twelve 6-node graphs optimised at depths 1..4 (a few seconds)."""
    graphs = generate_graphs(6, 12, 0.5, seed=100)
    rows = build_dataset(graphs, range(1, 5), restarts=4, seed=1)
    train, test = split_dataset(rows, 0.5, seed=0)
    return graphs, rows, train, test


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
