"""Tests for model persistence: bit-exact round trips and validation."""

import numpy as np
import pytest

from dpbn.baseline import init_aec
from dpbn.errors import BadModelFileError
from dpbn.modelio import MAGIC, load_model, save_model
from dpbn.network import DpbnNetwork
from dpbn.training import init_network, network_parameters


def params_of(net):
    if isinstance(net, DpbnNetwork):
        return [p for p, _ in network_parameters(net)]
    out = net.enc_weights + net.enc_biases + net.dec_biases
    return out + (net.dec_scales if net.tied else net.dec_weights)


class TestRoundTrip:
    def test_dpbn_bit_exact(self, tmp_path, rng):
        net = init_network([12, 8, 5, 3], [2, 3, 3], seed=1,
                           data=rng.normal(2, 1, (5, 12)))
        # make parameters non-trivial
        for p, _ in network_parameters(net):
            p += rng.normal(0, 0.01, p.shape)
        path = tmp_path / "m.dpbn"
        save_model(net, path)
        back = load_model(path)
        assert isinstance(back, DpbnNetwork)
        for a, b in zip(params_of(net), params_of(back)):
            np.testing.assert_array_equal(a, b)
        for la, lb in zip(net.layers, back.layers):
            assert la.kind == lb.kind
            assert la.input_tca.n_components == lb.input_tca.n_components

    def test_dpbn_shared_banks(self, tmp_path):
        net = init_network([10, 6, 3], [2, 2], seed=2, tca_shared=True)
        save_model(net, tmp_path / "s.dpbn")
        back = load_model(tmp_path / "s.dpbn")
        assert back.layers[0].input_tca.n_units == 1

    @pytest.mark.parametrize("tied", [True, False])
    def test_aec_bit_exact(self, tmp_path, tied, rng):
        net = init_aec([10, 6, 3], tied, seed=3)
        for p in params_of(net):
            p += rng.normal(0, 0.01, np.shape(p))
        path = tmp_path / "a.dpbn"
        save_model(net, path)
        back = load_model(path)
        assert back.tied == tied
        for a, b in zip(params_of(net), params_of(back)):
            np.testing.assert_array_equal(a, b)

    def test_double_roundtrip_identical_bytes(self, tmp_path):
        net = init_network([8, 5, 2], [1, 2], seed=4)
        p1, p2 = tmp_path / "one.dpbn", tmp_path / "two.dpbn"
        save_model(net, p1)
        save_model(load_model(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()


class TestValidation:
    @pytest.fixture
    def saved(self, tmp_path):
        net = init_network([8, 5, 2], [1, 2], seed=5)
        path = tmp_path / "m.dpbn"
        save_model(net, path)
        return path

    def test_magic(self, saved):
        blob = bytearray(saved.read_bytes())
        blob[:5] = b"WRONG"
        saved.write_bytes(bytes(blob))
        with pytest.raises(BadModelFileError, match="magic"):
            load_model(saved)

    def test_version(self, saved):
        blob = bytearray(saved.read_bytes())
        blob[5] = 99
        saved.write_bytes(bytes(blob))
        with pytest.raises(BadModelFileError, match="version"):
            load_model(saved)

    def test_payload_corruption_caught_by_checksum(self, saved):
        blob = bytearray(saved.read_bytes())
        blob[-30] ^= 0x55
        saved.write_bytes(bytes(blob))
        with pytest.raises(BadModelFileError, match="checksum"):
            load_model(saved)

    def test_truncation(self, saved):
        saved.write_bytes(saved.read_bytes()[:40])
        with pytest.raises(BadModelFileError):
            load_model(saved)

    def test_magic_constant(self):
        assert MAGIC == b"DPBN1"
