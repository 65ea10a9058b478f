import numpy as np
import pytest

from gembed import graph


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def edge_laplacian():
    return graph.laplacian(graph.SparseGraph.from_edges(2, [(0, 1)]))


def pytest_terminal_summary(terminalreporter):
    from _acceptance import summary_lines

    lines = summary_lines()
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
