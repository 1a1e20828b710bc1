import numpy as np
import pytest

from arforge.checkpoint import (CheckpointError, load_config_sidecar, load_tensors,
                                save_config_sidecar, save_tensors)
from arforge.tensor import Tensor


def make_params():
    rng = np.random.default_rng(0)
    return {
        "w1": Tensor(rng.normal(size=(3, 4)), requires_grad=True),
        "b1": Tensor(rng.normal(size=(4,)), requires_grad=True),
        "scalarish": Tensor(rng.normal(size=(1,)), requires_grad=True),
    }


def test_tensor_round_trip_bit_exact(tmp_path):
    params = make_params()
    prefix = tmp_path / "model"
    save_tensors(prefix, params)
    loaded = load_tensors(prefix)
    assert list(loaded) == list(params)  # order preserved
    for name, tensor in params.items():
        assert loaded[name].dtype == np.float64
        assert np.array_equal(loaded[name], tensor.values)


def test_manifest_is_human_readable(tmp_path):
    save_tensors(tmp_path / "m", make_params())
    lines = (tmp_path / "m.manifest").read_text().splitlines()
    assert lines[0] == "w1\t3,4\tf64"
    assert lines[1] == "b1\t4\tf64"


def test_truncated_blob_rejected(tmp_path):
    prefix = tmp_path / "m"
    save_tensors(prefix, make_params())
    blob = (tmp_path / "m.blob").read_bytes()
    (tmp_path / "m.blob").write_bytes(blob[:-8])
    with pytest.raises(CheckpointError):
        load_tensors(prefix)


def test_malformed_manifest_rejected(tmp_path):
    prefix = tmp_path / "m"
    save_tensors(prefix, make_params())
    (tmp_path / "m.manifest").write_text("w1\tnot-a-shape\tf64\n")
    with pytest.raises(CheckpointError):
        load_tensors(prefix)


def test_missing_files_rejected(tmp_path):
    with pytest.raises(CheckpointError):
        load_tensors(tmp_path / "absent")


def test_config_sidecar_round_trip(tmp_path):
    path = tmp_path / "model.config"
    save_config_sidecar(path, {"num_layers": 2, "dropout": 0.1, "role": "s2t"})
    loaded = load_config_sidecar(path)
    assert loaded == {"num_layers": "2", "dropout": "0.1", "role": "s2t"}
