import numpy as np
import pytest

from latnet.chain import build_chain
from latnet.lattice import integer_lattice
from latnet.network import build_network

DIAMOND_EDGES = [(1, 2), (1, 3), (2, 4), (3, 4)]


@pytest.fixture(scope="session")
def diamond():
    """Source 1, relays 2 and 3, destination 4, all powers 15."""
    return build_network(4, [4], DIAMOND_EDGES, edge_power={e: 15.0 for e in DIAMOND_EDGES})


@pytest.fixture(scope="session")
def single_link():
    return build_network(2, [2], [(1, 2)], edge_power={(1, 2): 15.0})


@pytest.fixture(scope="session")
def scalar_chain_48_12():
    """Two-user scalar chain: shaping 24Z and 12Z, code lattice 4Z (6/3 leaders)."""
    return build_chain(integer_lattice(1), [48.0, 12.0], 3, 1, tolerance=0.1, seed=2)
