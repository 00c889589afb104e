import numpy as np
import pytest
from hypothesis import given, strategies as st

from acrnn.model_module import autodiff as ad
from acrnn.model_module.autodiff import Graph, Tensor, current_graph, unbroadcast
from acrnn.shared.errors import NumericError, ShapeError

H = 1e-5


def numeric_grad(fn, arrays, index, upstream):
    """중앙 차분: d(Σ upstream · fn(arrays)) / d arrays[index]"""
    base = arrays[index]
    grad = np.zeros_like(base)
    it = np.nditer(base, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        saved = base[idx]
        base[idx] = saved + H
        plus = (fn(*arrays) * upstream).sum()
        base[idx] = saved - H
        minus = (fn(*arrays) * upstream).sum()
        base[idx] = saved
        grad[idx] = (plus - minus) / (2 * H)
    return grad


def relative_error(a, b):
    return np.max(np.abs(a - b)) / max(1e-8, np.max(np.abs(a) + np.abs(b)))


def check_gradients(op, arrays, seed=0):
    """op(*tensors) → Tensor 의 해석적 그래디언트와 수치 그래디언트 비교"""
    rng = np.random.default_rng(seed)
    tensors = [Tensor(a.copy(), requires_grad=True) for a in arrays]
    with Graph() as graph:
        out = op(*tensors)
    upstream = rng.normal(size=out.shape)
    graph.backward(out, upstream)

    def forward(*values):
        return op(*[Tensor(v) for v in values]).data

    work = [a.copy() for a in arrays]
    for i, t in enumerate(tensors):
        expected = numeric_grad(forward, work, i, upstream)
        assert relative_error(t.grad, expected) < 1e-4, f"input {i}"


@pytest.mark.parametrize("seed", range(5))
def test_elementwise_and_broadcast_gradients(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=(3, 4)), rng.normal(size=(4,))
    check_gradients(lambda x, y: ad.add(x, y), [a, b], seed)
    check_gradients(lambda x, y: ad.sub(x, y), [a, b], seed)
    check_gradients(lambda x, y: ad.mul(x, y), [a, b], seed)
    check_gradients(lambda x: ad.neg(x), [a], seed)


@pytest.mark.parametrize("seed", range(5))
def test_matmul_gradients(seed):
    rng = np.random.default_rng(seed)
    check_gradients(ad.matmul, [rng.normal(size=(2, 3, 4)), rng.normal(size=(4, 5))], seed)


@pytest.mark.parametrize("seed", range(5))
def test_reduction_and_shape_gradients(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(2, 3, 4))
    check_gradients(lambda t: ad.sum(t, axis=1), [x], seed)
    check_gradients(lambda t: ad.mean(t, axis=(0, 2), keepdims=True), [x], seed)
    check_gradients(lambda t: ad.reshape(t, (6, 4)), [x], seed)
    check_gradients(lambda t: ad.transpose(t, (2, 0, 1)), [x], seed)
    check_gradients(lambda t: t[:, 1, 1:3], [x], seed)
    check_gradients(lambda t, u: ad.concat([t, u], axis=1), [x, rng.normal(size=(2, 2, 4))], seed)
    check_gradients(lambda t, u: ad.stack([t, u], axis=1), [x, rng.normal(size=(2, 3, 4))], seed)


@pytest.mark.parametrize("seed", range(5))
def test_activation_gradients(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(3, 5))
    x[np.abs(x) < 1e-3] = 0.5
    check_gradients(ad.relu, [x], seed)
    check_gradients(ad.tanh, [x], seed)
    check_gradients(ad.sigmoid, [x], seed)
    check_gradients(lambda t: ad.softmax(t, axis=1), [x], seed)
    check_gradients(lambda t: ad.softmax(t, axis=0), [x], seed)


def test_no_graph_means_no_recording():
    x = Tensor(np.ones(3), requires_grad=True)
    y = ad.mul(x, 2.0)
    assert current_graph() is None
    assert not y.requires_grad


def test_graph_skips_constant_only_ops():
    with Graph() as graph:
        ad.add(Tensor(np.ones(2)), Tensor(np.ones(2)))
    assert len(graph) == 0


def test_gradients_accumulate_over_reuse():
    x = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    with Graph() as graph:
        y = ad.sum(ad.add(ad.mul(x, x), x))
    graph.backward(y)
    np.testing.assert_allclose(x.grad, 2 * x.data + 1)


def test_nested_graphs_are_independent():
    x = Tensor(np.ones(2), requires_grad=True)
    with Graph() as outer:
        with Graph() as inner:
            ad.mul(x, 3.0)
        ad.mul(x, 2.0)
    assert len(inner) == 1 and len(outer) == 1


def test_non_finite_results_raise():
    with pytest.raises(NumericError):
        ad.mul(Tensor(np.array([np.inf])), 0.0)


def test_matmul_shape_error():
    with pytest.raises(ShapeError):
        ad.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 2))))


@given(st.lists(st.floats(min_value=-50, max_value=50), min_size=1, max_size=20))
def test_softmax_is_a_distribution(values):
    y = ad.softmax(Tensor(np.array(values)), axis=0).data
    assert abs(y.sum() - 1.0) < 1e-9
    assert np.all(y >= 0)


def test_unbroadcast_sums_expanded_axes():
    grad = np.ones((2, 3, 4))
    np.testing.assert_array_equal(unbroadcast(grad, (3, 1)), np.full((3, 1), 8.0))
