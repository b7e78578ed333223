import numpy as np
import pytest

from sourceloc.graph import Graph

ACCEPTANCE_LINES = []


def record_criterion(number, passed, detail):
    ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def path_graph(n):
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def cycle_graph(n):
    return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def star_graph(leaves, center=0):
    others = [v for v in range(leaves + 1) if v != center]
    return Graph.from_edges(leaves + 1, [(center, v) for v in others])


def random_connected_graph(n, p, rng):
    """Random spanning tree plus independent extra edges."""
    order = rng.permutation(n)
    edges = [(int(order[i]), int(order[rng.integers(i)])) for i in range(1, n)]
    extra = np.argwhere(np.triu(rng.random((n, n)) < p, k=1))
    edges.extend(map(tuple, extra.tolist()))
    return Graph.from_edges(n, edges)


@pytest.fixture
def rng():
    return np.random.default_rng(20240613)
