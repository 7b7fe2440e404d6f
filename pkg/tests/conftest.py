import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fid.structures import GRAPH_VOCAB, Structure, Vocabulary


def graph(n, edges):
    table = set()
    for a, b in edges:
        table.add((a, b))
        table.add((b, a))
    return Structure(GRAPH_VOCAB, n, [table])


@pytest.fixture
def p3():
    return graph(3, [(0, 1), (1, 2)])


@pytest.fixture
def k3():
    return graph(3, [(0, 1), (1, 2), (0, 2)])


@pytest.fixture
def edge2():
    return graph(2, [(0, 1)])


@pytest.fixture
def h5():
    return graph(5, [(0, 1), (1, 2)])


@pytest.fixture
def i5():
    return graph(5, [])


@pytest.fixture
def k5():
    return graph(5, [(i, j) for i in range(5) for j in range(i + 1, 5)])


@pytest.fixture
def unary_vocab():
    return Vocabulary((("P", 1),))
