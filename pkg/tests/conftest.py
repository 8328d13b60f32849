"""Shared corpus builders: random distributions, random irreducible chains,
random reversible chains, random product specs."""

import numpy as np
import pytest

from cutofflab import MarkovChain, make_chain, product_spec


def random_distribution(rng, n):
    w = rng.random(n) + 1e-3
    return w / w.sum()


def random_chain(rng, n, label="random"):
    """Random irreducible kernel: uniform entries plus smoothing."""
    k = rng.random((n, n)) + 0.05
    k /= k.sum(axis=1, keepdims=True)
    return make_chain(k, label=label)


def random_reversible_chain(rng, n, label="random-reversible"):
    """Random walk on a weighted complete graph; reversible by construction."""
    w = rng.random((n, n)) + 0.05
    w = 0.5 * (w + w.T)
    degree = w.sum(axis=1)
    k = w / degree[:, None]
    pi = degree / degree.sum()
    return MarkovChain(kernel=k, stationary=pi, reversible=True, label=label)


def random_product_spec(rng, n_coords=None, max_states=4):
    n_coords = n_coords or int(rng.integers(2, 4))
    coords = [
        random_reversible_chain(rng, int(rng.integers(2, max_states + 1)))
        for _ in range(n_coords)
    ]
    weights = rng.random(n_coords) + 0.2
    return product_spec(coords, weights)


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
