from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cpwlnet import _kernels_py, regions
from cpwlnet.cpwl import eval_cpwl
from cpwlnet.network import AffineLayer, ReluNetwork, affine_net, compose_serial, eval_net, from_json, to_json
from cpwlnet.regions import to_cpwl

from conftest import random_net

ENGINES = [pytest.param(_kernels_py, id="numpy")]
if regions._native is not None:
    ENGINES.append(pytest.param(regions._native, id="compiled"))


def exact_copy(net):
    return from_json(to_json(net), exact=True)


@pytest.mark.parametrize("engine", ENGINES)
class TestOracle:
    def test_hat(self, hat, engine):
        f = to_cpwl(hat, engine=engine)
        np.testing.assert_allclose(f.nodes, [0, 0.5, 1])
        np.testing.assert_allclose(f.values, [0, 1, 0])

    def test_hat_hat(self, hat, engine):
        f = to_cpwl(compose_serial(hat, hat), engine=engine)
        np.testing.assert_array_equal(f.nodes, [0, 0.25, 0.5, 0.75, 1])
        np.testing.assert_array_equal(f.values, [0, 1, 0, 1, 0])

    def test_affine_only(self, engine):
        f = to_cpwl(affine_net([[3.0]], [-1.0]), engine=engine)
        np.testing.assert_array_equal(f.nodes, [0, 1])
        np.testing.assert_array_equal(f.values, [-1, 2])

    def test_crossing_on_breakpoint_not_duplicated(self, engine):
        # both neurons switch at 0.5
        net = ReluNetwork([AffineLayer(np.array([[1.0], [2.0]]), np.array([-0.5, -1.0])), AffineLayer(np.array([[1.0, 1.0]]), np.zeros(1))])
        f = to_cpwl(net, engine=engine)
        np.testing.assert_allclose(f.nodes, [0, 0.5, 1])

    def test_sawtooth_depth(self, hat, engine):
        net = hat
        for _ in range(4):
            net = compose_serial(hat, net)
        f = to_cpwl(net, engine=engine)
        assert f.segment_count == 32
        np.testing.assert_allclose(f.values, np.arange(33) % 2, atol=1e-12)

    def test_custom_interval(self, hat, engine):
        f = to_cpwl(hat, -1.0, 2.0, engine=engine)
        np.testing.assert_allclose(f.nodes, [-1, 0, 0.5, 1, 2])
        np.testing.assert_allclose(f.values, [0, 0, 1, 0, 0])


class TestRoundTrip:
    @given(st.integers(0, 2**32 - 1), st.lists(st.integers(1, 8), min_size=1, max_size=4))
    def test_matches_forward(self, seed, widths):
        net = random_net(np.random.default_rng(seed), widths)
        f = to_cpwl(net)
        xs = np.linspace(0, 1, 1000)
        direct = eval_net(net, xs)
        scale = 1 + np.max(np.abs(direct))
        np.testing.assert_allclose(eval_cpwl(f, xs), direct, rtol=0, atol=1e-10 * scale)

    @given(st.integers(0, 2**32 - 1), st.lists(st.integers(1, 6), min_size=1, max_size=3))
    def test_exact_agrees_with_float(self, seed, widths):
        net = random_net(np.random.default_rng(seed), widths)
        q = to_cpwl(exact_copy(net))
        assert q.exact
        xs = np.linspace(0, 1, 101)
        np.testing.assert_allclose(eval_cpwl(q.to_float(), xs), eval_net(net, xs), atol=1e-10)

    def test_exact_hat_hat(self, hat):
        f = to_cpwl(exact_copy(compose_serial(hat, hat)))
        assert list(f.nodes) == [Fraction(k, 4) for k in range(5)]
        assert list(f.values) == [0, 1, 0, 1, 0]

    def test_multi_output_rejected(self, rng):
        with pytest.raises(NotImplementedError):
            to_cpwl(random_net(rng, [3], output_dim=2))

    def test_pruning_is_minimal(self, rng):
        net = random_net(rng, [8, 8])
        f = to_cpwl(net)
        s = f.slopes()
        assert np.all(np.abs(np.diff(s)) > 1e-10 * (np.abs(s[:-1]) + np.abs(s[1:])))


@pytest.mark.skipif(regions._native is None, reason="compiled kernel not built")
class TestKernelEquivalence:
    @given(st.integers(0, 2**32 - 1), st.integers(2, 40), st.integers(1, 12))
    def test_refine(self, seed, n, m):
        rng = np.random.default_rng(seed)
        xs = np.sort(rng.uniform(0, 1, n))
        xs[0], xs[-1] = 0.0, 1.0
        xs = np.unique(xs)
        P = rng.normal(size=(xs.size, m))
        P[rng.uniform(size=P.shape) < 0.1] = 0.0
        a = _kernels_py.refine_crossings(xs, P, 1e-12)
        b = regions._native.refine_crossings(xs, P, 1e-12)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])

    @given(st.integers(0, 2**32 - 1), st.integers(2, 40), st.integers(1, 6))
    def test_prune(self, seed, n, m):
        rng = np.random.default_rng(seed)
        xs = np.unique(np.concatenate([[0.0, 1.0], rng.uniform(0, 1, n)]))
        V = np.cumsum(rng.choice([0.0, 1.0], size=(xs.size, m)) * rng.normal(size=(xs.size, m)), axis=0)
        a = _kernels_py.prune_collinear(xs, V, 1e-10)
        b = regions._native.prune_collinear(xs, V, 1e-10)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])

    @given(st.integers(0, 2**32 - 1))
    def test_to_cpwl(self, seed):
        net = random_net(np.random.default_rng(seed), [7, 5, 6])
        a = to_cpwl(net, engine=_kernels_py)
        b = to_cpwl(net, engine=regions._native)
        np.testing.assert_array_equal(a.nodes, b.nodes)
        np.testing.assert_array_equal(a.values, b.values)

    def test_backend_flag(self):
        assert regions.BACKEND == "compiled"


def test_pure_mode_selects_numpy(monkeypatch):
    import importlib

    monkeypatch.setenv("CPWLNET_PURE", "1")
    mod = importlib.reload(regions)
    try:
        assert mod.BACKEND == "numpy" and mod.kernels is _kernels_py
    finally:
        monkeypatch.delenv("CPWLNET_PURE")
        importlib.reload(regions)
