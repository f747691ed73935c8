"""Tensor container round trips and header validation."""

import json

import numpy as np
import pytest
from conftest import crandn

from sparse_isac.sensing import ProcessedCube
from sparse_isac.tensorio import (
    load_channel,
    load_echo,
    load_processed,
    load_tensors,
    save_channel,
    save_echo,
    save_processed,
    save_tensors,
)
from sparse_isac.waveform import generate_channel


class TestContainer:
    def test_round_trip(self, tmp_path, rng, desk):
        arrays = {"a": crandn(rng, 3, 4), "b": np.arange(5), "c": rng.random((2, 2)) > 0.5}
        save_tensors(tmp_path / "t.npz", arrays, seed=9, cfg=desk, note="x")
        back, header = load_tensors(tmp_path / "t.npz")
        for k, v in arrays.items():
            np.testing.assert_array_equal(back[k], v)
            assert back[k].dtype == v.dtype
        assert header["seed"] == 9 and header["note"] == "x"
        assert header["config_hash"] == desk.digest()

    def test_reserved_name(self, tmp_path):
        with pytest.raises(ValueError):
            save_tensors(tmp_path / "t.npz", {"header": np.zeros(1)})

    def test_wrong_format_rejected(self, tmp_path):
        header = {"format": "other/1", "arrays": {}}
        np.savez(tmp_path / "t.npz", header=np.array(json.dumps(header)))
        with pytest.raises(ValueError, match="format"):
            load_tensors(tmp_path / "t.npz")

    def test_shape_mismatch_rejected(self, tmp_path):
        header = {"format": "sparse-isac-tensor/1", "arrays": {"a": {"shape": [3], "dtype": "float64"}}}
        np.savez(tmp_path / "t.npz", header=np.array(json.dumps(header)), a=np.zeros(4))
        with pytest.raises(ValueError, match="does not match"):
            load_tensors(tmp_path / "t.npz")


class TestTypedContainers:
    def test_echo(self, tmp_path, rng, desk):
        cube = crandn(rng, 2, 3, 4)
        save_echo(tmp_path / "e.npz", cube, 4, desk)
        back, header = load_echo(tmp_path / "e.npz")
        np.testing.assert_array_equal(back, cube)
        assert header["kind"] == "echo"

    def test_channel(self, tmp_path, desk):
        channel = generate_channel(desk, 2)
        save_channel(tmp_path / "h.npz", channel, 2, desk)
        back, _ = load_channel(tmp_path / "h.npz")
        np.testing.assert_array_equal(back.h, channel.h)
        np.testing.assert_array_equal(back.theta_paths, channel.theta_paths)
        assert back.redraws == channel.redraws

    @pytest.mark.parametrize("with_flags", [True, False])
    def test_processed(self, tmp_path, rng, desk, with_flags):
        flags = rng.random((2, 4)) > 0.5 if with_flags else None
        cube = ProcessedCube.from_data(crandn(rng, 2, 3, 4), flags)
        save_processed(tmp_path / "p.npz", cube, None, desk)
        back, _ = load_processed(tmp_path / "p.npz")
        np.testing.assert_array_equal(back.data, cube.data)
        assert back.offsets == cube.offsets
        if with_flags:
            np.testing.assert_array_equal(back.flags, flags)
        else:
            assert back.flags is None
