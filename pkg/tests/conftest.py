from fractions import Fraction

import numpy as np
import pytest
from hypothesis import settings

from cpwlnet.cpwl import CpwlFunction, Grid
from cpwlnet.network import AffineLayer, ReluNetwork

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


def random_grid(rng, n_segments, min_gap=1e-4):
    """Random partition of [0, 1] whose segments are all at least ``min_gap`` long."""
    slack = 1.0 - n_segments * min_gap
    cuts = np.sort(rng.uniform(0, slack, n_segments - 1))
    gaps = np.diff(np.concatenate([[0.0], cuts, [slack]])) + min_gap
    nodes = np.concatenate([[0.0], np.cumsum(gaps)])
    nodes[-1] = 1.0
    return Grid(nodes)


def random_target(rng, n_segments, scale=10.0, min_gap=1e-4):
    g = random_grid(rng, n_segments, min_gap)
    return CpwlFunction(g, rng.uniform(-scale, scale, n_segments + 1))


def rational_target(rng, n_segments, denom=97):
    """Exact target with distinct rational nodes and small rational values."""
    ks = sorted(rng.choice(np.arange(1, 4 * n_segments * denom), size=n_segments - 1, replace=False))
    top = 4 * n_segments * denom
    nodes = [Fraction(0)] + [Fraction(int(k), top) for k in ks] + [Fraction(1)]
    values = [Fraction(int(v), 7) for v in rng.integers(-70, 71, n_segments + 1)]
    arr_n, arr_v = np.empty(len(nodes), dtype=object), np.empty(len(values), dtype=object)
    arr_n[:], arr_v[:] = nodes, values
    return CpwlFunction(Grid(arr_n), arr_v)


def random_net(rng, widths, input_dim=1, output_dim=1, scale=1.0):
    dims = [input_dim, *widths, output_dim]
    layers = [
        AffineLayer(rng.normal(0, scale, (b, a)), rng.normal(0, scale, b)) for a, b in zip(dims[:-1], dims[1:])
    ]
    return ReluNetwork(layers)


def hat_net():
    return ReluNetwork(
        [
            AffineLayer(np.ones((3, 1)), np.array([0.0, -0.5, -1.0])),
            AffineLayer(np.array([[2.0, -4.0, 2.0]]), np.zeros(1)),
        ]
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)


@pytest.fixture
def hat():
    return hat_net()
