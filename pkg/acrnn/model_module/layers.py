"""
복합 연산(conv2d, maxpool2d, batchnorm, dense, GRU, dropout, cross-entropy)과
파라미터를 보유하는 레이어 클래스

텐서 레이아웃은 채널 마지막(NHWC)이며, conv 커널은 kh × kw × cin × cout 입니다.
"""

import math
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..shared.errors import ArgumentError, EmptyInputError, ShapeError
from . import autodiff as ad
from .autodiff import Tensor, make_result

PARAM_ROLES = ("weight", "bias", "gamma", "beta")
TARGET_SUM_TOL = 1e-4


class Param:
    """
    학습 파라미터.

    Args:
        name (str): 모델 내 고유 이름 (예: "l1.conv.weight").
        shape (Sequence[int]): 텐서 형태.
        role (str): "weight" | "bias" | "gamma" | "beta". L2 감쇠는 weight에만 적용됩니다.
        dtype: numpy dtype.
    """

    def __init__(self, name: str, shape: Sequence[int], role: str, dtype=np.float32):
        if role not in PARAM_ROLES:
            raise ArgumentError(f"알 수 없는 파라미터 역할입니다: {role}")
        self.name = name
        self.role = role
        fill = np.ones if role == "gamma" else np.zeros
        self.tensor = Tensor(fill(tuple(shape), dtype=dtype), requires_grad=True, name=name)

    @property
    def weight_decay(self) -> bool:
        return self.role == "weight"

    @property
    def value(self) -> np.ndarray:
        return self.tensor.data

    @value.setter
    def value(self, array: np.ndarray) -> None:
        array = np.asarray(array, dtype=self.tensor.dtype)
        if array.shape != self.tensor.shape:
            raise ShapeError(f"{self.name}: 형태 불일치 {array.shape} != {self.tensor.shape}")
        self.tensor.data = array

    @property
    def grad(self) -> Optional[np.ndarray]:
        return self.tensor.grad

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.tensor.shape

    @property
    def size(self) -> int:
        return self.tensor.size

    def __repr__(self) -> str:
        return f"Param({self.name}, shape={self.shape}, role={self.role})"


class BatchNormState:
    """배치 정규화 이동 평균/분산 (초기값: 평균 0, 분산 1)"""

    def __init__(self, channels: int, dtype=np.float32):
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)


# ---------------------------------------------------------------------------
# 함수형 복합 연산
# ---------------------------------------------------------------------------

def _same_padding(size: int, kernel: int, stride: int) -> Tuple[int, int, int]:
    out = math.ceil(size / stride)
    total = max((out - 1) * stride + kernel - size, 0)
    return out, total // 2, total - total // 2


def conv2d(
    x: Tensor,
    w: Tensor,
    b: Optional[Tensor] = None,
    stride: Tuple[int, int] = (1, 1),
    padding: str = "same",
) -> Tensor:
    """
    NHWC 입력에 대한 2D cross-correlation.

    'same' 패딩은 출력 크기가 ceil(in / stride)가 되도록 0을 채우며,
    홀수 패딩은 뒤쪽에 한 칸 더 붙입니다.

    Args:
        x (Tensor): B × H × W × Cin.
        w (Tensor): kh × kw × Cin × Cout.
        b (Optional[Tensor]): Cout 바이어스.
        stride (Tuple[int, int]): (sh, sw).
        padding (str): "same" 또는 "valid".

    Returns:
        Tensor: B × Ho × Wo × Cout.
    """
    if x.ndim != 4 or w.ndim != 4:
        raise ShapeError(f"conv2d 입력은 4차원이어야 합니다: x{x.shape}, w{w.shape}")
    batch, height, width, cin = x.shape
    kh, kw, wcin, cout = w.shape
    if wcin != cin:
        raise ShapeError(f"conv2d 채널 불일치: 입력 {cin}, 커널 {wcin}")
    if b is not None and b.shape != (cout,):
        raise ShapeError(f"conv2d 바이어스 형태 불일치: {b.shape} != ({cout},)")
    sh, sw = stride

    if padding == "same":
        out_h, top, bottom = _same_padding(height, kh, sh)
        out_w, left, right = _same_padding(width, kw, sw)
    elif padding == "valid":
        if height < kh or width < kw:
            raise ShapeError(f"valid conv2d 입력이 커널보다 작습니다: {x.shape} vs {w.shape}")
        out_h, out_w = (height - kh) // sh + 1, (width - kw) // sw + 1
        top = bottom = left = right = 0
    else:
        raise ArgumentError(f"지원하지 않는 padding입니다: {padding}")

    xp = np.pad(x.data, ((0, 0), (top, bottom), (left, right), (0, 0)))
    span_h, span_w = (out_h - 1) * sh + 1, (out_w - 1) * sw + 1

    def patch(array, i, j):
        return array[:, i: i + span_h: sh, j: j + span_w: sw, :]

    out = np.zeros((batch, out_h, out_w, cout), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            out += patch(xp, i, j) @ w.data[i, j]
    if b is not None:
        out += b.data

    def backward(g):
        grad_xp = np.zeros_like(xp)
        grad_w = np.zeros_like(w.data)
        flat_g = g.reshape(-1, cout)
        for i in range(kh):
            for j in range(kw):
                grad_w[i, j] = patch(xp, i, j).reshape(-1, cin).T @ flat_g
                patch(grad_xp, i, j)[...] += g @ w.data[i, j].T
        grad_x = grad_xp[:, top: top + height, left: left + width, :]
        if b is None:
            return grad_x, grad_w
        return grad_x, grad_w, g.sum(axis=(0, 1, 2))

    inputs = (x, w) if b is None else (x, w, b)
    return make_result("conv2d", out, inputs, backward)


def maxpool2d(x: Tensor, pool: Tuple[int, int], stride: Optional[Tuple[int, int]] = None) -> Tensor:
    """
    NHWC 최대 풀링. 불완전한 끝 윈도우는 버립니다 (floor).

    backward는 윈도우 내 row-major 순서의 첫 번째 최대값 위치로만 그래디언트를 보냅니다.

    Args:
        x (Tensor): B × H × W × C.
        pool (Tuple[int, int]): (ph, pw).
        stride (Optional[Tuple[int, int]]): 기본값은 pool과 동일.

    Returns:
        Tensor: B × Ho × Wo × C.
    """
    ph, pw = pool
    sh, sw = stride or pool
    if x.ndim != 4:
        raise ShapeError(f"maxpool2d 입력은 4차원이어야 합니다: {x.shape}")
    batch, height, width, channels = x.shape
    if height < ph or width < pw:
        raise ShapeError(f"풀링 크기 {pool}가 입력 {x.shape[1:3]}보다 큽니다")
    out_h, out_w = (height - ph) // sh + 1, (width - pw) // sw + 1

    windows = np.lib.stride_tricks.sliding_window_view(x.data, (ph, pw), axis=(1, 2))
    windows = windows[:, ::sh, ::sw][:, :out_h, :out_w]
    flat = windows.reshape(batch, out_h, out_w, channels, ph * pw)
    argmax = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, argmax[..., None], axis=-1)[..., 0]

    def backward(g):
        grad = np.zeros_like(x.data)
        span_h, span_w = (out_h - 1) * sh + 1, (out_w - 1) * sw + 1
        for k in range(ph * pw):
            i, j = divmod(k, pw)
            grad[:, i: i + span_h: sh, j: j + span_w: sw, :] += np.where(argmax == k, g, 0)
        return (grad,)

    return make_result("maxpool2d", out, (x,), backward)


def batchnorm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    state: BatchNormState,
    training: bool,
    momentum: float = 0.99,
    eps: float = 1e-5,
) -> Tensor:
    """
    채널 마지막 축 기준 배치 정규화.

    학습 모드는 N·H·W 축의 배치 통계(모분산)로 정규화하고 이동 통계를 갱신합니다.
    평가 모드는 이동 통계를 사용합니다.
    """
    channels = x.shape[-1]
    if gamma.shape != (channels,) or beta.shape != (channels,):
        raise ShapeError(f"batchnorm 채널 불일치: x{x.shape}, gamma{gamma.shape}, beta{beta.shape}")
    axes = tuple(range(x.ndim - 1))

    if training:
        mu = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        state.running_mean = (momentum * state.running_mean + (1 - momentum) * mu).astype(state.running_mean.dtype)
        state.running_var = (momentum * state.running_var + (1 - momentum) * var).astype(state.running_var.dtype)
    else:
        mu, var = state.running_mean, state.running_var

    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = ((x.data - mu) * inv_std).astype(x.dtype)
    out = gamma.data * xhat + beta.data
    count = x.size // channels

    def backward(g):
        grad_gamma = (g * xhat).sum(axis=axes)
        grad_beta = g.sum(axis=axes)
        dxhat = g * gamma.data
        if training:
            grad_x = inv_std / count * (
                count * dxhat - dxhat.sum(axis=axes) - xhat * (dxhat * xhat).sum(axis=axes)
            )
        else:
            grad_x = dxhat * inv_std
        return grad_x.astype(x.dtype), grad_gamma, grad_beta

    return make_result("batchnorm", out, (x, gamma, beta), backward)


def dense(x: Tensor, w: Tensor, b: Optional[Tensor] = None) -> Tensor:
    """x·W + b (x는 … × D, W는 D × K)"""
    out = ad.matmul(x, w)
    return out if b is None else ad.add(out, b)


GRU_KEYS = ("W_z", "W_r", "W_h", "b_z", "b_r", "b_h")


def gru_cell(x: Tensor, h_prev: Tensor, params: Mapping[str, Tensor]) -> Tensor:
    """
    GRU 한 스텝 (reset 게이트를 후보 계산 전에 적용).

        z = σ([x, h]W_z + b_z)
        r = σ([x, h]W_r + b_r)
        h̃ = tanh([x, r⊙h]W_h + b_h)
        h = (1 − z)⊙h + z⊙h̃

    Args:
        x (Tensor): B × D 입력.
        h_prev (Tensor): B × H 이전 상태.
        params (Mapping[str, Tensor]): W_z, W_r, W_h ((D+H) × H), b_z, b_r, b_h (H).

    Returns:
        Tensor: B × H 새 상태.
    """
    hidden = h_prev.shape[-1]
    expected = x.shape[-1] + hidden
    for key in GRU_KEYS:
        shape = params[key].shape
        want = (expected, hidden) if key.startswith("W") else (hidden,)
        if shape != want:
            raise ShapeError(f"GRU 파라미터 {key} 형태 불일치: {shape} != {want}")
    if x.shape[0] != h_prev.shape[0]:
        raise ShapeError(f"GRU 배치 불일치: x{x.shape}, h{h_prev.shape}")

    xh = ad.concat([x, h_prev], axis=-1)
    z = ad.sigmoid(dense(xh, params["W_z"], params["b_z"]))
    r = ad.sigmoid(dense(xh, params["W_r"], params["b_r"]))
    xrh = ad.concat([x, ad.mul(r, h_prev)], axis=-1)
    candidate = ad.tanh(dense(xrh, params["W_h"], params["b_h"]))
    return ad.add(ad.mul(ad.sub(1.0, z), h_prev), ad.mul(z, candidate))


def bidirectional(x: Tensor, fwd: Mapping[str, Tensor], bwd: Mapping[str, Tensor]) -> Tensor:
    """
    양방향 GRU. 초기 상태는 0이며 스텝마다 [→h_t, ←h_t]를 이어 붙입니다.

    Args:
        x (Tensor): B × T × D.
        fwd (Mapping[str, Tensor]): 정방향 셀 파라미터.
        bwd (Mapping[str, Tensor]): 역방향 셀 파라미터.

    Returns:
        Tensor: B × T × 2H.
    """
    if x.ndim != 3:
        raise ShapeError(f"bidirectional 입력은 B × T × D여야 합니다: {x.shape}")
    batch, steps, _ = x.shape
    if steps < 1:
        raise EmptyInputError("시퀀스 길이가 0입니다")

    def run(params, order):
        hidden = params["b_z"].shape[0]
        h = Tensor(np.zeros((batch, hidden), dtype=x.dtype))
        states = {}
        for t in order:
            h = gru_cell(x[:, t, :], h, params)
            states[t] = h
        return [states[t] for t in range(steps)]

    forward_states = run(fwd, range(steps))
    backward_states = run(bwd, reversed(range(steps)))
    return ad.concat([ad.stack(forward_states, axis=1), ad.stack(backward_states, axis=1)], axis=-1)


def dropout(x: Tensor, p: float, training: bool, rng: Optional[np.random.Generator]) -> Tensor:
    """inverted dropout: 학습 모드에서 확률 p로 0, 생존값은 1/(1−p)배. 평가 모드는 항등."""
    if not 0.0 <= p < 1.0:
        raise ArgumentError(f"dropout 확률은 [0, 1) 범위여야 합니다: {p}")
    if not training or p == 0.0:
        return x
    if rng is None:
        raise ArgumentError("학습 모드 dropout에는 난수 생성기가 필요합니다")
    keep = (rng.random(x.shape) >= p).astype(x.dtype) / x.dtype.type(1.0 - p)
    return ad.mul(x, keep)


def cross_entropy(logits: Tensor, targets: np.ndarray) -> Tensor:
    """
    soft label 교차 엔트로피의 배치 평균: −Σ_c t·log_softmax(logit).

    그래디언트는 (softmax − target) / B 입니다.

    Args:
        logits (Tensor): B × C.
        targets (np.ndarray): B × C 라벨 분포 (각 행 합 1).

    Returns:
        Tensor: 스칼라 손실.

    Raises:
        ArgumentError: 라벨 행의 합이 1 ± 1e-4가 아닌 경우.
    """
    targets = np.asarray(getattr(targets, "data", targets), dtype=logits.dtype)
    if targets.shape != logits.shape:
        raise ShapeError(f"logits{logits.shape}와 targets{targets.shape} 형태가 다릅니다")
    sums = targets.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > TARGET_SUM_TOL):
        raise ArgumentError(f"라벨 분포의 행 합이 1이 아닙니다: {sums}")

    batch = logits.shape[0]
    shifted = logits.data - logits.data.max(axis=-1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    loss = -(targets * log_probs).sum() / batch
    probs = np.exp(log_probs)

    def backward(g):
        return (g * (probs - targets) / batch,)

    return make_result("cross_entropy", np.asarray(loss, dtype=logits.dtype), (logits,), backward)


# ---------------------------------------------------------------------------
# 파라미터 보유 레이어
# ---------------------------------------------------------------------------

class Layer:
    """파라미터와 비학습 상태를 이름으로 노출하는 레이어 기반 클래스"""

    def parameters(self) -> List[Param]:
        return []

    def buffers(self) -> Dict[str, np.ndarray]:
        return {}

    def load_buffers(self, arrays: Mapping[str, np.ndarray]) -> None:
        pass


class Conv2D(Layer):
    def __init__(self, name: str, kernel: Tuple[int, int], cin: int, cout: int, dtype=np.float32):
        self.name = name
        self.weight = Param(f"{name}.weight", (*kernel, cin, cout), "weight", dtype)
        self.bias = Param(f"{name}.bias", (cout,), "bias", dtype)

    def __call__(self, x: Tensor) -> Tensor:
        return conv2d(x, self.weight.tensor, self.bias.tensor)

    def parameters(self) -> List[Param]:
        return [self.weight, self.bias]


class BatchNorm(Layer):
    def __init__(self, name: str, channels: int, momentum: float = 0.99, eps: float = 1e-5, dtype=np.float32):
        self.name = name
        self.momentum = momentum
        self.eps = eps
        self.gamma = Param(f"{name}.gamma", (channels,), "gamma", dtype)
        self.beta = Param(f"{name}.beta", (channels,), "beta", dtype)
        self.state = BatchNormState(channels, dtype)

    def __call__(self, x: Tensor, training: bool) -> Tensor:
        return batchnorm(x, self.gamma.tensor, self.beta.tensor, self.state, training, self.momentum, self.eps)

    def parameters(self) -> List[Param]:
        return [self.gamma, self.beta]

    def buffers(self) -> Dict[str, np.ndarray]:
        return {
            f"{self.name}.running_mean": self.state.running_mean,
            f"{self.name}.running_var": self.state.running_var,
        }

    def load_buffers(self, arrays: Mapping[str, np.ndarray]) -> None:
        dtype = self.state.running_mean.dtype
        self.state.running_mean = np.asarray(arrays[f"{self.name}.running_mean"], dtype=dtype)
        self.state.running_var = np.asarray(arrays[f"{self.name}.running_var"], dtype=dtype)


class Dense(Layer):
    def __init__(self, name: str, in_dim: int, out_dim: int, dtype=np.float32):
        self.name = name
        self.weight = Param(f"{name}.weight", (in_dim, out_dim), "weight", dtype)
        self.bias = Param(f"{name}.bias", (out_dim,), "bias", dtype)

    def __call__(self, x: Tensor) -> Tensor:
        return dense(x, self.weight.tensor, self.bias.tensor)

    def parameters(self) -> List[Param]:
        return [self.weight, self.bias]


class GRUCell(Layer):
    def __init__(self, name: str, input_dim: int, hidden: int, dtype=np.float32):
        self.name = name
        self.params = {}
        for key in GRU_KEYS:
            if key.startswith("W"):
                self.params[key] = Param(f"{name}.{key}", (input_dim + hidden, hidden), "weight", dtype)
            else:
                self.params[key] = Param(f"{name}.{key}", (hidden,), "bias", dtype)

    def tensors(self) -> Dict[str, Tensor]:
        return {key: p.tensor for key, p in self.params.items()}

    def __call__(self, x: Tensor, h_prev: Tensor) -> Tensor:
        return gru_cell(x, h_prev, self.tensors())

    def parameters(self) -> List[Param]:
        return list(self.params.values())


class BiGRU(Layer):
    def __init__(self, name: str, input_dim: int, hidden: int, dtype=np.float32):
        self.name = name
        self.fwd = GRUCell(f"{name}.fwd", input_dim, hidden, dtype)
        self.bwd = GRUCell(f"{name}.bwd", input_dim, hidden, dtype)

    def __call__(self, x: Tensor) -> Tensor:
        return bidirectional(x, self.fwd.tensors(), self.bwd.tensors())

    def parameters(self) -> List[Param]:
        return self.fwd.parameters() + self.bwd.parameters()
