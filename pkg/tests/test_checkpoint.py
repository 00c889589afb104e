import numpy as np
import pytest

from acrnn.feature_module.schemas import NormStats
from acrnn.model_module.acrnn import AcrnnModel
from acrnn.shared.errors import FeatureStoreError
from acrnn.train_module.checkpoint import (
    checkpoint_from_model,
    encode_checkpoint,
    load_checkpoint,
    model_from_checkpoint,
    save_checkpoint,
)
from acrnn.train_module.trainer import init_weights

from conftest import tiny_feature_config, tiny_model_config

STATS = NormStats(mean=[-4.5, 0.01], std=[2.0, 0.3])


def _checkpoint(seed=0, **model_overrides):
    model = init_weights(AcrnnModel(tiny_model_config(**model_overrides)), 0.1, np.random.default_rng(seed))
    model.norms["l1"].state.running_mean[:] = 0.25
    return checkpoint_from_model(model, STATS, epoch=7, feature_cfg=tiny_feature_config(), class_names=["저음", "고음"])


def test_encoding_is_deterministic():
    assert encode_checkpoint(_checkpoint()) == encode_checkpoint(_checkpoint())
    assert encode_checkpoint(_checkpoint(seed=1)) != encode_checkpoint(_checkpoint())


def test_save_and_load_roundtrip(tmp_path):
    original = _checkpoint()
    path = save_checkpoint(tmp_path / "ckpt" / "fold1.ckpt", original)
    loaded = load_checkpoint(path)

    assert loaded.epoch == 7
    assert loaded.norm_stats == STATS
    assert loaded.meta == original.meta
    assert list(loaded.tensors) == list(original.tensors)
    for name, array in original.tensors.items():
        np.testing.assert_array_equal(loaded.tensors[name], array)
    np.testing.assert_array_equal(loaded.tensors["l1.bn.running_mean"], 0.25)
    assert not (tmp_path / "ckpt" / "fold1.ckpt.tmp").exists()


def test_loaded_model_reproduces_predictions(tmp_path):
    original = _checkpoint(attention_site="l6")
    path = save_checkpoint(tmp_path / "m.ckpt", original)
    x = np.random.default_rng(2).normal(size=(2, 18, 32, 2)).astype(np.float32)
    expected = model_from_checkpoint(original).predict_proba(x)
    np.testing.assert_allclose(model_from_checkpoint(load_checkpoint(path)).predict_proba(x), expected, rtol=1e-6)


def test_float64_model_is_stored_as_float32(tmp_path):
    original = _checkpoint(dtype="float64")
    loaded = load_checkpoint(save_checkpoint(tmp_path / "m.ckpt", original))
    weight = loaded.tensors["l1.conv.weight"]
    assert weight.dtype == np.float64
    np.testing.assert_array_equal(weight, original.tensors["l1.conv.weight"].astype(np.float32))


@pytest.mark.parametrize("mutate", [
    lambda raw: b"NOPE" + raw[4:],
    lambda raw: raw[:-3],
    lambda raw: raw[:20],
])
def test_corrupt_checkpoint(tmp_path, mutate):
    path = save_checkpoint(tmp_path / "m.ckpt", _checkpoint())
    path.write_bytes(mutate(path.read_bytes()))
    with pytest.raises(FeatureStoreError):
        load_checkpoint(path)


def test_missing_checkpoint(tmp_path):
    with pytest.raises(FeatureStoreError):
        load_checkpoint(tmp_path / "absent.ckpt")
