import numpy as np
import pytest

from psg4d.transcend import build_models, load_params, save_params
from psg4d.transcend.checkpoint import CheckpointError


def test_round_trip_identity(tmp_path):
    rng = np.random.default_rng(0)
    params = {
        "a/weight": rng.normal(size=(3, 4)).astype(np.float32),
        "a/bias": rng.normal(size=4).astype(np.float32),
        "b/kernel": rng.normal(size=(2, 2, 3, 3)).astype(np.float32),
    }
    path = tmp_path / "test.ckpt"
    save_params(path, params)
    loaded = load_params(path)
    assert set(loaded) == set(params)
    for name, value in params.items():
        assert loaded[name].shape == value.shape
        assert np.array_equal(loaded[name].astype(np.float32), value)


def test_serialization_is_canonical(tmp_path):
    values = {"x": np.ones((2, 2)), "y": np.zeros(3)}
    first = tmp_path / "first.ckpt"
    second = tmp_path / "second.ckpt"
    save_params(first, dict(values))
    save_params(second, dict(reversed(list(values.items()))))
    assert first.read_bytes() == second.read_bytes()


def test_model_params_survive_store_and_load(tmp_path):
    models = build_models(dim=8, layers=1, heads=2, vocab_size=5, mask_shape=(3, 3), seed=1)
    path = tmp_path / "model.ckpt"
    save_params(path, models.params())
    stored = load_params(path)
    models.load_values(stored)
    save_params(tmp_path / "again.ckpt", models.params())
    assert (tmp_path / "again.ckpt").read_bytes() == path.read_bytes()


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(CheckpointError, match="magic"):
        load_params(path)


def test_truncated_rejected(tmp_path):
    path = tmp_path / "model.ckpt"
    save_params(path, {"w": np.ones((4, 4))})
    data = path.read_bytes()
    path.write_bytes(data[:-7])
    with pytest.raises(CheckpointError):
        load_params(path)


def test_trailing_bytes_rejected(tmp_path):
    path = tmp_path / "model.ckpt"
    save_params(path, {"w": np.ones(2)})
    path.write_bytes(path.read_bytes() + b"junk")
    with pytest.raises(CheckpointError, match="trailing"):
        load_params(path)
