"""Tests for the auto-encoder composition: encode, decode, round trips."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpbn.errors import ShapeMismatchError
from dpbn.maxent import MaxEntKind
from dpbn.network import (
    DpbnNetwork,
    LayerSpec,
    autoencode,
    decode,
    decode_with_trace,
    encode,
    sampling_efficiency,
)
from dpbn.saddle import SolverOptions
from dpbn.tca import Tca, tca_eval, tca_neutral_init
from dpbn.training import init_network

from conftest import orthonormal, square_identity_net

TIGHT = SolverOptions(tol=1e-13, max_iter=200)


class TestLayerSpec:
    def test_rejects_dimension_increase(self):
        with pytest.raises(ShapeMismatchError):
            LayerSpec(np.ones((2, 4)),
                      tca_neutral_init(MaxEntKind.LINEAR, 1, units=2))

    def test_rejects_unit_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            LayerSpec(np.ones((4, 2)),
                      tca_neutral_init(MaxEntKind.LINEAR, 1, units=3))

    def test_network_rejects_broken_chain(self):
        rng = np.random.default_rng(0)
        l1 = LayerSpec(orthonormal(rng, 8, 5),
                       tca_neutral_init(MaxEntKind.LINEAR, 1, units=8))
        l2 = LayerSpec(orthonormal(rng, 4, 2),
                       tca_neutral_init(MaxEntKind.TRUNC_GAUSS, 1, units=4))
        with pytest.raises(ShapeMismatchError):
            DpbnNetwork([l1, l2])


class TestEncode:
    def test_neutral_layer_is_linear_projection(self, rng):
        w = orthonormal(rng, 7, 4)
        net = DpbnNetwork([LayerSpec(
            w, tca_neutral_init(MaxEntKind.LINEAR, 1, units=7))])
        x = rng.normal(0, 2, 7)
        y, _ = encode(net, x)
        np.testing.assert_allclose(y, w.T @ x, atol=1e-14)

    def test_two_neutral_layers_compose(self, rng):
        w1, w2 = orthonormal(rng, 8, 5), orthonormal(rng, 5, 3)
        net = DpbnNetwork([
            LayerSpec(w1, tca_neutral_init(MaxEntKind.LINEAR, 1, units=8)),
            LayerSpec(w2, tca_neutral_init(MaxEntKind.LINEAR, 1, units=5))])
        x = rng.normal(0, 1, 8)
        y, _ = encode(net, x)
        np.testing.assert_allclose(y, w2.T @ (w1.T @ x), atol=1e-14)

    def test_trace_matches_recomputation(self, small_net, small_batch):
        y, trace = encode(small_net, small_batch)
        cur = small_batch
        for i, layer in enumerate(small_net.layers):
            u = tca_eval(layer.input_tca, cur)
            np.testing.assert_array_equal(trace.tca_outputs[i], u)
            cur = u @ layer.weights
            np.testing.assert_array_equal(trace.linear_outputs[i], cur)
        np.testing.assert_array_equal(y, cur)

    def test_shape_errors(self, small_net):
        with pytest.raises(ShapeMismatchError):
            encode(small_net, np.zeros(11))
        with pytest.raises(ShapeMismatchError):
            encode(small_net, np.zeros((3, 4, 12)))


class TestDecode:
    def test_square_neutral_roundtrip_is_identity(self, rng):
        net = square_identity_net()
        x = rng.normal(0, 2, 6)
        x_hat, success = autoencode(net, x, TIGHT)
        assert success
        np.testing.assert_allclose(x_hat, x, atol=1e-8)

    def test_deepest_solve_always_exact(self, rng):
        # in-manifold by construction: the first backward solve converges
        # and reproduces the bottleneck exactly
        for trial in range(20):
            dims = sorted(rng.integers(3, 16, size=3))[::-1]
            dims = [int(d) for d in dims]
            net = init_network([dims[0] + 4] + dims, [2, 2, 2],
                               seed=trial)
            x = rng.normal(0, 1.5, (5, dims[0] + 4))
            y, _ = encode(net, x)
            _, _, conv, trace = decode_with_trace(net, y, TIGHT)
            assert conv[:, -1].all()
            w_last = net.layers[-1].weights
            lifted = trace.saddle[-1].x_hat
            resid = np.max(np.abs(lifted @ w_last - y))
            assert resid <= 1e-13 * (1 + np.max(np.abs(y)))

    def test_backward_forward_consistency_at_converged_layers(self, rng):
        net = init_network([14, 9, 5], [2, 3], seed=5)
        x = rng.normal(0, 1.5, (30, 14))
        y, _ = encode(net, x)
        _, _, conv, trace = decode_with_trace(net, y, TIGHT)
        for li in range(2):
            w = net.layers[li].weights
            lifted = trace.saddle[li].x_hat
            target = trace.targets[li]
            resid = np.max(np.abs(lifted @ w - target), axis=1)
            ok = conv[:, li]
            assert np.all(resid[ok] <= 1e-13 * (1 + np.max(np.abs(target))))

    def test_range_discipline_of_lifts(self, rng):
        net = init_network([14, 9, 5], [2, 3], seed=6)
        x = rng.normal(0, 2, (25, 14))
        y, _ = encode(net, x)
        _, _, _, trace = decode_with_trace(net, y)
        # layer 1 has the positive-half-line base: lifts strictly positive
        assert np.all(trace.saddle[1].x_hat > 0)

    def test_decode_deterministic(self, small_net, rng):
        x = rng.normal(0, 1.5, (10, 12))
        y, _ = encode(small_net, x)
        a1 = decode(small_net, y)[0]
        a2 = decode(small_net, y)[0]
        np.testing.assert_array_equal(a1, a2)

    def test_success_monotone_under_tolerance_loosening(self):
        from conftest import stressed_mixed_batch
        net, x = stressed_mixed_batch()
        y, _ = encode(net, x)
        _, s_tight, _ = decode(net, y, SolverOptions(tol=1e-8))
        _, s_loose, _ = decode(net, y, SolverOptions(tol=1e-6))
        assert 0 < s_tight.mean() < 1.0
        assert np.all(s_loose[s_tight])  # tight success implies loose

    def test_failures_are_flags_not_errors(self):
        from conftest import stressed_mixed_batch
        net, x = stressed_mixed_batch()
        x_hat, success = autoencode(net, x)
        assert 0 < success.mean() < 1.0
        assert np.isfinite(x_hat).all()
        assert success.dtype == bool

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000))
    def test_shape_contracts_random_stacks(self, seed):
        rng = np.random.default_rng(seed)
        n_layers = int(rng.integers(1, 4))
        dims = [int(rng.integers(2, 20))]
        for _ in range(n_layers):
            dims.append(int(rng.integers(1, dims[-1] + 1)))
        ks = [int(rng.integers(1, 4)) for _ in range(n_layers)]
        net = init_network(dims, ks, seed=seed)
        x = rng.normal(0, 1, (3, dims[0]))
        y, trace = encode(net, x)
        assert y.shape == (3, dims[-1])
        for i in range(n_layers):
            assert trace.tca_outputs[i].shape == (3, dims[i])
            assert trace.linear_outputs[i].shape == (3, dims[i + 1])
        x_hat, success, conv = decode(net, y)
        assert x_hat.shape == x.shape
        assert success.shape == (3,)
        assert conv.shape == (3, n_layers)


class TestSamplingEfficiency:
    def test_bijective_toy_is_one(self, rng):
        net = square_identity_net()
        assert sampling_efficiency(net, rng.normal(0, 1, (20, 6))) == 1.0

    def test_infeasible_target_is_zero(self, rng):
        # nonnegative weights at a positive-range layer keep every
        # projection positive, so strictly negative targets are unreachable
        w = np.abs(orthonormal(rng, 6, 3)) + 0.01
        tg_layer = LayerSpec(
            w, tca_neutral_init(MaxEntKind.TRUNC_GAUSS, 1, units=6))
        net = DpbnNetwork([tg_layer])
        bad_y = -np.abs(rng.normal(2.0, 0.5, (8, 3))) - 0.5
        _, success, _ = decode(net, bad_y)
        assert np.mean(success) == 0.0

    def test_vector_and_batch_agree(self, small_net, rng):
        x = rng.normal(0, 1.5, (5, 12))
        batch_hat, batch_success = autoencode(small_net, x)
        for i in range(5):
            xi_hat, si = autoencode(small_net, x[i])
            np.testing.assert_allclose(xi_hat, batch_hat[i], atol=1e-12)
            assert si == batch_success[i]
