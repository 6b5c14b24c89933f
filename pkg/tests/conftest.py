import numpy as np
import pytest

from symsort import kernels
from symsort.sources import keys_from_seeds, make_source, shipped_sources

SHIPPED = shipped_sources()

FAIR = {"type": "memoryless", "probs": [0.5, 0.5]}
HEAVY = {"type": "intermittent", "r": 2, "gamma": 1.5, "sigma": 0}


@pytest.fixture(params=sorted(SHIPPED))
def shipped(request):
    return SHIPPED[request.param]


@pytest.fixture
def fair():
    return make_source(FAIR)


def make_keys(source, seed, n):
    return keys_from_seeds(source, kernels.key_seeds(seed, 0, n))


class ListKey:
    """Finite key for unit tests: symbols past the end compare as ``pad``."""

    def __init__(self, symbols, pad=0):
        self.symbols = list(symbols)
        self.pad = pad

    def symbol_at(self, i):
        return self.symbols[i] if i < len(self.symbols) else self.pad

    def prefix(self, k):
        return tuple(self.symbol_at(i) for i in range(k))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
