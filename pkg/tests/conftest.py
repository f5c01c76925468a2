import numpy as np
import pytest

from pairrank.graphs import ComparisonGraph, is_connected


def random_connected_graph(n: int, rng: np.random.Generator, extra: float = 0.3) -> ComparisonGraph:
    """Random spanning tree plus each remaining pair with probability ``extra``."""
    perm = rng.permutation(n)
    pairs = set()
    for k in range(1, n):
        a, b = int(perm[k]), int(perm[rng.integers(0, k)])
        pairs.add((max(a, b), min(a, b)))
    for a in range(n):
        for b in range(a):
            if rng.random() < extra:
                pairs.add((a, b))
    g = ComparisonGraph.from_edges(n, pairs)
    assert is_connected(g)
    return g


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LOG: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LOG:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LOG:
            terminalreporter.write_line(line)
