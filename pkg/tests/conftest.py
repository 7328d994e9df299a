import random

import pytest

from grcsim.engine import node_seed, pin
from grcsim.graph import Graph


class ScriptedRng:
    """Hands out scripted single coins first, then falls back to a seeded stream."""

    def __init__(self, coins=(), seed=0):
        self.coins = list(coins)
        self.rng = random.Random(seed)

    def getrandbits(self, k):
        if k == 1 and self.coins:
            return self.coins.pop(0)
        return self.rng.getrandbits(k)

    def random(self):
        return self.rng.random()


def scripted(coins_by_node, seed=0):
    """rng_factory forcing the first coins of selected nodes."""
    return lambda v: ScriptedRng(coins_by_node.get(v, ()), node_seed(seed, v))


def code_of(g: Graph, v: int, edge: int, index: int, k: int | None = None) -> int:
    """Local pin code at node v of pin ``index`` on ``edge``."""
    return pin(g.ports[v].index(edge) + 1, index, k or g.k)


@pytest.fixture
def triangle():
    return Graph(3, [(0, 1), (1, 2), (0, 2)], weights=[1, 2, 3])


@pytest.fixture
def two_triangles():
    # triangles {0,1,2} and {3,4,5} joined by the bridge 2-3 (edge index 6)
    edges = [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)]
    return Graph(6, edges)
