"""
numpy 기반 역전파 자동미분 엔진

- Tensor: numpy 배열 + requires_grad + grad
- Graph: 컨텍스트 매니저. 활성 상태에서만 연산 노드를 기록하며,
  backward는 기록 순서의 정확한 역순으로 노드를 방문합니다.
- 모든 연산은 출력에 NaN/Inf가 있으면 NumericError를 던집니다.
"""

import threading
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit

from ..shared.errors import NumericError, ShapeError

ArrayLike = Union["Tensor", np.ndarray, float, int]
BackwardFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]

_local = threading.local()


class Tensor:
    """
    미분 가능한 밀집 텐서.

    Attributes:
        data (np.ndarray): 값 (row-major).
        requires_grad (bool): 그래디언트 필요 여부.
        grad (Optional[np.ndarray]): backward 후 누적된 그래디언트.
        name (Optional[str]): 디버깅용 이름.
    """

    __slots__ = ("data", "requires_grad", "grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None, dtype=None):
        array = np.asarray(data, dtype=dtype)
        if not np.issubdtype(array.dtype, np.floating):
            array = array.astype(np.float64)
        self.data = array
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return int(self.data.size)

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        label = f" name={self.name}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad}{label})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return index(self, key)


class Node:
    """그래프 노드: (연산 종류, 입력, 출력, backward 함수)"""

    __slots__ = ("op", "inputs", "output", "backward_fn")

    def __init__(self, op: str, inputs: Sequence[Tensor], output: Tensor, backward_fn: BackwardFn):
        self.op = op
        self.inputs = tuple(inputs)
        self.output = output
        self.backward_fn = backward_fn


class Graph:
    """
    연산 기록용 컨텍스트 매니저.

    with 블록 안에서 만들어진 연산 중 입력 하나라도 requires_grad인 것만 기록합니다.
    그래프는 스레드별로 활성화되므로 서로 다른 스레드의 그래프는 독립적입니다.

    Example:
        >>> with Graph() as graph:
        ...     loss = cross_entropy(model(x), y)
        >>> graph.backward(loss)
    """

    def __init__(self):
        self.nodes: List[Node] = []

    def __enter__(self) -> "Graph":
        stack = getattr(_local, "stack", None)
        if stack is None:
            stack = _local.stack = []
        stack.append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        _local.stack.pop()

    def __len__(self) -> int:
        return len(self.nodes)

    def record(self, node: Node) -> None:
        self.nodes.append(node)

    def backward(self, output: Tensor, grad: Optional[np.ndarray] = None) -> None:
        """
        output에서 시작해 기록 역순으로 그래디언트를 전파합니다.

        Args:
            output (Tensor): 시작 텐서 (보통 스칼라 손실).
            grad (Optional[np.ndarray]): 시작 그래디언트 (기본값: 1).
        """
        if grad is None:
            grad = np.ones_like(output.data)
        _accumulate(output, np.asarray(grad, dtype=output.dtype))

        for node in reversed(self.nodes):
            upstream = node.output.grad
            if upstream is None:
                continue
            grads = node.backward_fn(upstream)
            for tensor, g in zip(node.inputs, grads):
                if g is None or not tensor.requires_grad:
                    continue
                _accumulate(tensor, g)


def current_graph() -> Optional[Graph]:
    """현재 스레드에서 활성화된 그래프 (없으면 None)"""
    stack = getattr(_local, "stack", None)
    return stack[-1] if stack else None


def _accumulate(tensor: Tensor, grad: np.ndarray) -> None:
    if grad.shape != tensor.shape:
        grad = grad.reshape(tensor.shape)
    grad = grad.astype(tensor.dtype, copy=False)
    tensor.grad = grad if tensor.grad is None else tensor.grad + grad


def as_tensor(value: ArrayLike, dtype=None) -> Tensor:
    """Tensor가 아니면 requires_grad=False 상수 텐서로 감쌉니다."""
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=dtype))


def check_finite(data: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(data)):
        raise NumericError(f"'{op}' 연산 결과에 NaN/Inf가 포함되어 있습니다")


def make_result(op: str, data: np.ndarray, inputs: Sequence[Tensor], backward_fn: BackwardFn) -> Tensor:
    """
    연산 결과 텐서를 만들고, 그래프가 활성화되어 있으면 노드를 기록합니다.

    Args:
        op (str): 연산 이름.
        data (np.ndarray): 순전파 결과.
        inputs (Sequence[Tensor]): 입력 텐서.
        backward_fn (BackwardFn): 출력 그래디언트 → 입력별 그래디언트.

    Returns:
        Tensor: 결과 텐서.
    """
    check_finite(data, op)
    graph = current_graph()
    tracked = graph is not None and any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=tracked)
    if tracked:
        graph.record(Node(op, inputs, out, backward_fn))
    return out


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """브로드캐스트된 그래디언트를 원래 형태로 합산 축소합니다."""
    if grad.shape == tuple(shape):
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, dim in enumerate(shape) if dim == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _pair(a: ArrayLike, b: ArrayLike) -> Tuple[Tensor, Tensor]:
    if isinstance(a, Tensor) and not isinstance(b, Tensor):
        return a, as_tensor(b, dtype=a.dtype)
    if isinstance(b, Tensor) and not isinstance(a, Tensor):
        return as_tensor(a, dtype=b.dtype), b
    return as_tensor(a), as_tensor(b)


# ---------------------------------------------------------------------------
# 산술
# ---------------------------------------------------------------------------

def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = _pair(a, b)
    return make_result(
        "add", a.data + b.data, (a, b),
        lambda g: (unbroadcast(g, a.shape), unbroadcast(g, b.shape)),
    )


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = _pair(a, b)
    return make_result(
        "sub", a.data - b.data, (a, b),
        lambda g: (unbroadcast(g, a.shape), unbroadcast(-g, b.shape)),
    )


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = _pair(a, b)
    return make_result(
        "mul", a.data * b.data, (a, b),
        lambda g: (unbroadcast(g * b.data, a.shape), unbroadcast(g * a.data, b.shape)),
    )


def neg(a: Tensor) -> Tensor:
    a = as_tensor(a)
    return make_result("neg", -a.data, (a,), lambda g: (-g,))


def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    """(…, D) × (D, K) → (…, K)"""
    a, b = _pair(a, b)
    if b.ndim != 2 or a.shape[-1] != b.shape[0]:
        raise ShapeError(f"matmul 형태 불일치: {a.shape} @ {b.shape}")

    def backward(g):
        grad_a = g @ b.data.T
        grad_b = a.data.reshape(-1, a.shape[-1]).T @ g.reshape(-1, b.shape[1])
        return grad_a, grad_b

    return make_result("matmul", a.data @ b.data, (a, b), backward)


# ---------------------------------------------------------------------------
# 축소 / 형태 변환
# ---------------------------------------------------------------------------

def _normalize_axes(axis, ndim: int) -> Tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    x = as_tensor(x)
    axes = _normalize_axes(axis, x.ndim)

    def backward(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, x.shape),)

    return make_result("sum", x.data.sum(axis=axes, keepdims=keepdims), (x,), backward)


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    axes = _normalize_axes(axis, x.ndim)
    count = int(np.prod([x.shape[a] for a in axes])) if axes else 1

    def backward(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g / count, x.shape),)

    return make_result("mean", x.data.mean(axis=axes, keepdims=keepdims), (x,), backward)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    x = as_tensor(x)
    return make_result("reshape", x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),))


def transpose(x: Tensor, axes: Sequence[int]) -> Tensor:
    x = as_tensor(x)
    inverse = np.argsort(axes)
    return make_result("transpose", x.data.transpose(axes), (x,), lambda g: (g.transpose(inverse),))


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    axis = axis % tensors[0].ndim
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return make_result(
        "concat",
        np.concatenate([t.data for t in tensors], axis=axis),
        tensors,
        lambda g: tuple(np.split(g, bounds, axis=axis)),
    )


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    axis = axis % (tensors[0].ndim + 1)
    return make_result(
        "stack",
        np.stack([t.data for t in tensors], axis=axis),
        tensors,
        lambda g: tuple(np.take(g, i, axis=axis) for i in range(len(tensors))),
    )


def index(x: Tensor, key) -> Tensor:
    """기본 슬라이싱 (정수/슬라이스/Ellipsis)"""
    x = as_tensor(x)

    def backward(g):
        grad = np.zeros_like(x.data)
        grad[key] = g
        return (grad,)

    return make_result("index", x.data[key], (x,), backward)


# ---------------------------------------------------------------------------
# 활성화
# ---------------------------------------------------------------------------

def relu(x: Tensor) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0
    return make_result("relu", np.where(mask, x.data, 0).astype(x.dtype), (x,), lambda g: (g * mask,))


def tanh(x: Tensor) -> Tensor:
    x = as_tensor(x)
    y = np.tanh(x.data)
    return make_result("tanh", y, (x,), lambda g: (g * (1 - y * y),))


def sigmoid(x: Tensor) -> Tensor:
    x = as_tensor(x)
    y = expit(x.data)
    return make_result("sigmoid", y, (x,), lambda g: (g * y * (1 - y),))


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """max를 뺀 뒤 exp를 정규화하는 안정적 softmax"""
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return make_result("softmax", y, (x,), backward)
