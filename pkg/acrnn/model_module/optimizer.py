"""SGD + Nesterov momentum 옵티마이저 (weight 역할 파라미터에만 L2 감쇠)"""

from typing import Dict, Mapping, Optional, Sequence

import numpy as np

from ..shared.errors import ArgumentError, ShapeError
from .layers import Param


class OptimizerState:
    """
    파라미터별 속도 버퍼와 현재 학습률.

    Args:
        params (Sequence[Param]): 최적화 대상 파라미터.
        lr (float): 학습률 (> 0).
        momentum (float): 모멘텀 계수 μ.
    """

    def __init__(self, params: Sequence[Param], lr: float = 0.01, momentum: float = 0.9):
        if lr <= 0:
            raise ArgumentError(f"학습률은 양수여야 합니다: {lr}")
        if not 0.0 <= momentum < 1.0:
            raise ArgumentError(f"momentum은 [0, 1) 범위여야 합니다: {momentum}")
        self.lr = lr
        self.momentum = momentum
        self.velocity: Dict[str, np.ndarray] = {p.name: np.zeros_like(p.value) for p in params}


def sgd_nesterov_step(
    params: Sequence[Param],
    state: OptimizerState,
    l2: float = 0.0,
    grads: Optional[Mapping[str, np.ndarray]] = None,
) -> None:
    """
    Nesterov 형식 SGD 한 스텝을 제자리에서 적용합니다.

        g ← grad + l2·p   (weight_decay 파라미터만)
        v ← μv − lr·g
        p ← p + μv − lr·g

    Args:
        params (Sequence[Param]): 파라미터.
        state (OptimizerState): 속도/학습률 상태 (갱신됨).
        l2 (float): L2 정규화 계수.
        grads (Optional[Mapping[str, np.ndarray]]): 이름별 그래디언트 (기본값: 각 파라미터의 grad).
            그래디언트가 없는 파라미터는 0으로 취급합니다.
    """
    mu, lr = state.momentum, state.lr
    for param in params:
        grad = grads.get(param.name) if grads is not None else param.grad
        value = param.value
        grad = np.zeros_like(value) if grad is None else np.asarray(grad, dtype=value.dtype)
        if grad.shape != value.shape:
            raise ShapeError(f"{param.name}: 그래디언트 형태 불일치 {grad.shape} != {value.shape}")
        if l2 and param.weight_decay:
            grad = grad + l2 * value

        velocity = state.velocity.get(param.name)
        if velocity is None:
            velocity = np.zeros_like(value)
        velocity = mu * velocity - lr * grad
        state.velocity[param.name] = velocity.astype(value.dtype)
        param.value = value + mu * velocity - lr * grad
