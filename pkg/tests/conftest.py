"""Shared fixtures: small networks and corpora used across test modules."""

import numpy as np
import pytest

from dpbn.maxent import MaxEntKind
from dpbn.network import DpbnNetwork, LayerSpec
from dpbn.tca import tca_neutral_init
from dpbn.training import _orthonormal_columns, init_network


def orthonormal(rng, n, m):
    return _orthonormal_columns(rng, n, m)


def square_identity_net(dim=6, seed=0):
    """Square orthonormal layer with a pass-through activation: the round
    trip is the identity up to solver tolerance."""
    rng = np.random.default_rng(seed)
    w = orthonormal(rng, dim, dim)
    return DpbnNetwork([LayerSpec(w, tca_neutral_init(
        MaxEntKind.LINEAR, 1, units=dim))])


def stressed_mixed_batch():
    """A 3-layer net plus batch whose decode genuinely mixes successes and
    failures: uncentered hidden weights leave the feasible cone of the
    middle solve narrow, and perturbed activation parameters push some
    lifted targets outside it.  Failures need at least three layers; with
    fewer, the only positive-range solve is the deepest one, which is
    always in-manifold."""
    dims = [16, 10, 6, 3]
    rng_init = np.random.default_rng(4)
    layers = []
    for i in range(3):
        base = MaxEntKind.LINEAR if i == 0 else MaxEntKind.TRUNC_GAUSS
        t = tca_neutral_init(base, [2, 3, 3][i], units=dims[i],
                             rng=rng_init)
        w = _orthonormal_columns(rng_init, dims[i], dims[i + 1])
        layers.append(LayerSpec(w, t))
    net = DpbnNetwork(layers)
    prng = np.random.default_rng(104)
    for layer in net.layers:
        t = layer.input_tca
        t.biases += prng.normal(0, 0.3, t.biases.shape)
        t.log_weights[:, 1:] += prng.normal(0, 0.3,
                                            t.log_weights[:, 1:].shape)
    x = np.random.default_rng(1234).normal(0, 2, (50, 16))
    return net, x


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_net():
    """The canonical small stack: 12 -> 8 -> 5 -> 3, components 2/3/3."""
    return init_network([12, 8, 5, 3], [2, 3, 3], seed=7)


@pytest.fixture
def small_batch(rng):
    return rng.normal(0.0, 1.5, (6, 12))
