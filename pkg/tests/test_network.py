"""Unit tests for the three-headed network and its checkpoint format."""

import dataclasses
import json
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from ordadapt.network import (CheckpointError, Network, NetworkConfig,
                              uniform_init_bound)

CFG = NetworkConfig(input_dim=5, feature_dim=4, feature_hidden=6,
                    domain_hidden=3, levels=4, seed=1)


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            NetworkConfig(input_dim=0)
        with pytest.raises(ValueError):
            NetworkConfig(input_dim=3, feature_dim=0)
        with pytest.raises(ValueError):
            NetworkConfig(input_dim=3, levels=1)

    def test_defaults(self):
        cfg = NetworkConfig(input_dim=12)
        assert (cfg.feature_dim, cfg.feature_hidden, cfg.domain_hidden,
                cfg.levels) == (16, 32, 8, 6)


class TestInitialization:
    def test_parameter_shapes(self):
        net = Network(CFG)
        shapes = {name: t.data.shape for name, t in net.params.items()}
        assert shapes == {
            "feat.w0": (5, 6), "feat.b0": (6,),
            "feat.w1": (6, 4), "feat.b1": (4,),
            "reg.w": (4, 1), "reg.b": (1,),
            "ord.w": (4, 4), "ord.b": (4,),
            "dom.w0": (4, 3), "dom.b0": (3,),
            "dom.w1": (3, 1), "dom.b1": (1,),
        }

    def test_biases_start_at_zero(self):
        net = Network(CFG)
        for name, t in net.params.items():
            if ".b" in name:
                assert_array_equal(t.data, np.zeros_like(t.data))

    def test_weights_within_fan_bound(self):
        """Uniform init stays inside +-sqrt(6 / (fan_in + fan_out))."""
        net = Network(CFG)
        fans = {"feat.w0": (5, 6), "feat.w1": (6, 4), "reg.w": (4, 1),
                "ord.w": (4, 4), "dom.w0": (4, 3), "dom.w1": (3, 1)}
        for name, (fi, fo) in fans.items():
            bound = uniform_init_bound(fi, fo)
            assert np.abs(net.params[name].data).max() <= bound

    def test_bound_value(self):
        assert uniform_init_bound(4, 4) == math.sqrt(6.0 / 8.0)

    def test_seed_determinism(self):
        a, b = Network(CFG), Network(CFG)
        for name in a.params:
            assert_array_equal(a.params[name].data, b.params[name].data)
        other = Network(dataclasses.replace(CFG, seed=2))
        assert not np.array_equal(other.params["feat.w0"].data,
                                  a.params["feat.w0"].data)


class TestForwardPasses:
    def setup_method(self):
        self.net = Network(CFG)
        self.frames = np.random.default_rng(0).normal(size=(7, 5))

    def test_feature_shape(self):
        feats = self.net.features(self.frames)
        assert feats.data.shape == (7, 4)
        assert (feats.data >= 0.0).all()  # relu output

    def test_regression_shape(self):
        assert self.net.forward_source(self.frames).data.shape == (7, 1)

    def test_ordinal_rows_are_distributions(self):
        probs = self.net.forward_target(self.frames).data
        assert probs.shape == (7, 4)
        assert (probs > 0.0).all()
        assert_allclose(probs.sum(axis=1), np.ones(7), atol=1e-12)

    def test_domain_probability_range(self):
        out = self.net.forward_domain(self.frames, trade_off=1.0).data
        assert out.shape == (7, 1)
        assert ((out > 0.0) & (out < 1.0)).all()

    def test_input_dim_mismatch(self):
        with pytest.raises(ValueError):
            self.net.features(np.zeros((3, 4)))


class TestParameterAccess:
    def test_parameter_group(self):
        net = Network(CFG)
        assert set(net.parameter_group("feat")) == {"feat.w0", "feat.b0",
                                                    "feat.w1", "feat.b1"}
        assert set(net.parameter_group("dom")) == {"dom.w0", "dom.b0",
                                                   "dom.w1", "dom.b1"}
        with pytest.raises(KeyError):
            net.parameter_group("conv")

    def test_state_arrays_are_copies(self):
        net = Network(CFG)
        state = net.state_arrays()
        state["reg.w"][:] = 99.0
        assert not np.array_equal(net.params["reg.w"].data, state["reg.w"])

    def test_load_state_shape_check(self):
        net = Network(CFG)
        state = net.state_arrays()
        state["reg.w"] = np.zeros((2, 2))
        with pytest.raises(CheckpointError):
            net.load_state(state)

    def test_clone_is_independent(self):
        net = Network(CFG)
        other = net.clone()
        for name in net.params:
            assert_array_equal(other.params[name].data, net.params[name].data)
        other.params["reg.w"].data += 1.0
        assert not np.array_equal(other.params["reg.w"].data,
                                  net.params["reg.w"].data)


class TestCheckpoints:
    def test_round_trip_bit_identical(self, tmp_path):
        net = Network(CFG)
        path = tmp_path / "model.json"
        net.save(path)
        loaded = Network.load(path)
        assert loaded.config == net.config
        for name in net.params:
            assert_array_equal(loaded.params[name].data, net.params[name].data)

    def test_resave_byte_identical(self, tmp_path):
        """Save, load, save again: the two files must match byte for byte."""
        net = Network(CFG)
        first = tmp_path / "a.json"
        second = tmp_path / "b.json"
        net.save(first)
        Network.load(first).save(second)
        assert first.read_bytes() == second.read_bytes()

    def test_rejects_invalid_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{ not json")
        with pytest.raises(CheckpointError):
            Network.load(path)

    def test_rejects_wrong_format(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"format": "other", "version": 1}))
        with pytest.raises(CheckpointError):
            Network.load(path)

    def test_rejects_wrong_version(self, tmp_path):
        net = Network(CFG)
        path = tmp_path / "model.json"
        net.save(path)
        payload = json.loads(path.read_text())
        payload["version"] = 99
        path.write_text(json.dumps(payload))
        with pytest.raises(CheckpointError):
            Network.load(path)

    def test_rejects_missing_tensor(self, tmp_path):
        net = Network(CFG)
        path = tmp_path / "model.json"
        net.save(path)
        payload = json.loads(path.read_text())
        del payload["tensors"]["reg.w"]
        path.write_text(json.dumps(payload))
        with pytest.raises(CheckpointError):
            Network.load(path)

    def test_rejects_wrong_shape(self, tmp_path):
        net = Network(CFG)
        path = tmp_path / "model.json"
        net.save(path)
        payload = json.loads(path.read_text())
        payload["tensors"]["reg.b"] = {"shape": [2], "data": [0.0, 0.0]}
        path.write_text(json.dumps(payload))
        with pytest.raises(CheckpointError):
            Network.load(path)
