import numpy as np
import pytest

from dynlat.model import DynamicNetwork


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_network(n, T, density=0.3, seed=0, directed=True):
    """Erdos-Renyi style snapshots; handy for enumeration oracles."""
    rng = np.random.default_rng(seed)
    snaps = []
    for _ in range(T):
        es = set()
        for i in range(n):
            for j in range(n):
                if i != j and rng.random() < density:
                    es.add((i, j))
        snaps.append(es)
    return DynamicNetwork.from_snapshots(n, snaps, directed=directed)


@pytest.fixture
def small_net():
    return random_network(n=4, T=2, density=0.4, seed=7)
