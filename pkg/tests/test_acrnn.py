import numpy as np
import pytest

from acrnn.model_module.acrnn import AcrnnModel, head_without_attention, rnn_attention
from acrnn.model_module.autodiff import Graph, Tensor
from acrnn.model_module.complexity import count_params
from acrnn.model_module.layers import cross_entropy
from acrnn.model_module.schemas import AcrnnConfig, ablation_grid
from acrnn.shared.errors import ShapeError
from acrnn.train_module.trainer import init_weights, one_hot

from conftest import tiny_model_config


def random_model(cfg, seed=0, std=0.3):
    return init_weights(AcrnnModel(cfg), std, np.random.default_rng(seed))


def test_full_size_shape_trace():
    model = AcrnnModel(AcrnnConfig())
    trace = []
    logits, _ = model.forward(np.zeros((2, 128, 128, 2), dtype=np.float32), trace=trace)
    shapes = {entry.stage: entry.shape for entry in trace}
    assert shapes == {
        "l2-pool": (32, 42, 32),
        "l4-pool": (8, 42, 64),
        "l6-pool": (8, 14, 128),
        "l8-pool": (4, 7, 256),
        "sequence": (7, 1024),
        "l9": (7, 512),
        "l10": (7, 512),
        "pooled": (512,),
        "logits": (50,),
    }
    assert logits.shape == (2, 50)


def test_input_shape_is_checked():
    model = AcrnnModel(tiny_model_config())
    with pytest.raises(ShapeError):
        model.forward(np.zeros((1, 32, 18, 2)))
    with pytest.raises(ShapeError):
        model.forward(np.zeros((18, 32, 2)))


def test_config_rejects_inputs_that_pool_to_nothing():
    with pytest.raises(ValueError):
        AcrnnConfig(input_frames=10, input_bands=128)


@pytest.mark.parametrize("cfg", ablation_grid(AcrnnConfig()), ids=lambda c: c.setting_label)
def test_allocated_params_match_analytic_count(cfg):
    assert AcrnnModel(cfg).param_count() == count_params(cfg)


def test_ablation_grid_has_eleven_distinct_settings():
    labels = [c.setting_label for c in ablation_grid(AcrnnConfig())]
    assert len(labels) == 11 == len(set(labels))
    assert labels[0] == "none" and "l4-softmax" in labels and "l10-linear" in labels


def test_sigmoid_cnn_attention_weights_are_gates():
    cfg = tiny_model_config(attention_site="l4", cnn_attention_scaling="sigmoid", dtype="float64")
    model = random_model(cfg)
    x = np.random.default_rng(1).normal(size=(3, 18, 32, 2))
    _, record = model.forward(x, record_attention=True)
    assert record.site == "l4" and record.scaling == "sigmoid"
    assert record.weights.shape == (3, 6)
    assert np.all((record.weights > 0) & (record.weights < 1))


@pytest.mark.parametrize("cfg", [
    tiny_model_config(attention_site="l6", cnn_attention_scaling="softmax", dtype="float64"),
    tiny_model_config(attention_site="l10", input_frames=72, dtype="float64"),
    tiny_model_config(attention_site="l10", rnn_attention_score="linear", input_frames=72, dtype="float64"),
])
def test_softmax_attention_weights_sum_to_one(cfg):
    model = random_model(cfg)
    x = np.random.default_rng(2).normal(size=(2, cfg.input_frames, 32, 2))
    _, record = model.forward(x, record_attention=True)
    assert record.scaling == "softmax"
    np.testing.assert_allclose(record.weights.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(record.weights >= 0)


def test_l10_attention_sequence_length():
    cfg = tiny_model_config(input_frames=72, dtype="float64")
    _, record = random_model(cfg).forward(np.zeros((1, 72, 32, 2)), record_attention=True)
    assert record.weights.shape == (1, 4)


def test_single_step_attention_returns_the_step():
    h = Tensor(np.random.default_rng(0).normal(size=(2, 1, 6)))
    pooled, beta = rnn_attention(h, Tensor(np.ones(4)), Tensor(np.ones((6, 4))), Tensor(np.zeros(4)))
    np.testing.assert_allclose(beta.data, 1.0)
    np.testing.assert_allclose(pooled.data, h.data[:, 0])


def test_no_attention_model_has_no_record_and_uses_end_states():
    cfg = tiny_model_config(attention_site="none")
    model = random_model(cfg)
    _, record = model.forward(np.zeros((1, 18, 32, 2)), record_attention=True)
    assert record is None
    assert model.cnn_att is None and not model.att_params

    h = np.arange(2 * 3 * 4, dtype=float).reshape(2, 3, 4)
    out = head_without_attention(Tensor(h)).data
    np.testing.assert_array_equal(out[:, :2], h[:, -1, :2])
    np.testing.assert_array_equal(out[:, 2:], h[:, 0, 2:])


def test_state_dict_roundtrip_reproduces_outputs():
    cfg = tiny_model_config(attention_site="l2", dtype="float64")
    source = random_model(cfg, seed=3)
    x = np.random.default_rng(4).normal(size=(2, 18, 32, 2))
    source.forward(x, training=True, rng=np.random.default_rng(0))

    target = AcrnnModel(cfg)
    target.load_state_dict(source.state_dict())
    np.testing.assert_array_equal(target.predict_proba(x), source.predict_proba(x))


def test_load_state_dict_reports_missing_tensors():
    model = AcrnnModel(tiny_model_config())
    state = model.state_dict()
    state.pop("l1.conv.weight")
    with pytest.raises(ShapeError):
        model.load_state_dict(state)


@pytest.mark.parametrize("site", ["none", "l2", "l8", "l10"])
def test_every_parameter_receives_a_gradient(site):
    cfg = tiny_model_config(attention_site=site, dtype="float64")
    model = random_model(cfg, seed=5, std=0.1)
    x = np.random.default_rng(6).normal(size=(4, 18, 32, 2))
    with Graph() as graph:
        logits = model(x, training=True, rng=np.random.default_rng(0))
        loss = cross_entropy(logits, np.eye(2)[[0, 1, 0, 1]])
    graph.backward(loss)
    assert all(p.grad is not None and p.grad.shape == p.shape for p in model.parameters())


def test_predict_proba_rows_sum_to_one():
    model = random_model(tiny_model_config(dtype="float64"))
    probs = model.predict_proba(np.random.default_rng(7).normal(size=(3, 18, 32, 2)))
    assert probs.shape == (3, 2)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0)


@pytest.mark.parametrize("score", ["mlp", "linear"])
def test_rnn_attention_follows_step_permutation(score):
    rng = np.random.default_rng(8)
    h = rng.normal(size=(2, 7, 6))
    if score == "mlp":
        params = (Tensor(rng.normal(size=4)), Tensor(rng.normal(size=(6, 4))), Tensor(rng.normal(size=4)))
    else:
        params = (Tensor(rng.normal(size=6)),)
    order = rng.permutation(7)
    pooled, beta = rnn_attention(Tensor(h), *params)
    permuted_pooled, permuted_beta = rnn_attention(Tensor(h[:, order]), *params)
    np.testing.assert_allclose(permuted_beta.data, beta.data[:, order], rtol=1e-12)
    np.testing.assert_allclose(permuted_pooled.data, pooled.data, rtol=1e-12, atol=1e-12)


def test_fresh_model_first_loss_is_near_uniform():
    cfg = tiny_model_config(num_classes=50, dtype="float64")
    model = random_model(cfg, seed=9, std=0.05)
    rng = np.random.default_rng(10)
    x = rng.normal(size=(8, 18, 32, 2))
    with Graph():
        loss = cross_entropy(model(x, training=True, rng=rng), one_hot(rng.integers(0, 50, size=8), 50))
    assert abs(float(loss.data) - np.log(50)) < 0.3
