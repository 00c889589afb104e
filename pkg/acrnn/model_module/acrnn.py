"""
ACRNN: 8개 conv 층 + 2개 Bi-GRU 층 + 프레임 단위 어텐션 + dense 분류기

입력 세그먼트는 시간 × 밴드 × 2 이며, 모델 내부에서 B × F(밴드) × T(시간) × C 로
전치해 커널 (3,5)가 3밴드 × 5프레임을 덮도록 합니다. GRU는 시간축을 따라 실행됩니다.
"""

import logging
from collections import OrderedDict
from typing import Dict, List, Mapping, Optional, Tuple, Union

import numpy as np

from ..shared.errors import ShapeError
from . import autodiff as ad
from .autodiff import Tensor
from .layers import BatchNorm, BiGRU, Conv2D, Dense, Layer, Param, conv2d, dropout, maxpool2d
from .schemas import CONV_BLOCKS, AcrnnConfig, AttentionRecord, TraceEntry

logger = logging.getLogger(__name__)

INPUT_CHANNELS = 2


def cnn_attention(m: Tensor, scaling: str, w: Tensor, b: Tensor) -> Tuple[Tensor, Tensor]:
    """
    CNN 특징맵 프레임 어텐션.

    3×3 conv(→ 1채널) → 주파수 전체 평균 → 시간축 스케일링(σ) → M' = M·A

    Args:
        m (Tensor): B × F × T × C 특징맵.
        scaling (str): "softmax" (시간축 정규화) 또는 "sigmoid" (프레임별 게이트).
        w (Tensor): 3 × 3 × C × 1 커널.
        b (Tensor): (1,) 바이어스.

    Returns:
        Tuple[Tensor, Tensor]: (M', A). A는 B × 1 × T × 1.
    """
    if m.ndim != 4:
        raise ShapeError(f"CNN 어텐션 입력은 B × F × T × C여야 합니다: {m.shape}")
    scores = ad.mean(conv2d(m, w, b), axis=1, keepdims=True)
    if scaling == "softmax":
        weights = ad.softmax(scores, axis=2)
    elif scaling == "sigmoid":
        weights = ad.sigmoid(scores)
    else:
        raise ShapeError(f"알 수 없는 스케일링 함수입니다: {scaling}")
    return ad.mul(m, weights), weights


def rnn_attention(
    h: Tensor, w: Tensor, u: Optional[Tensor] = None, b: Optional[Tensor] = None
) -> Tuple[Tensor, Tensor]:
    """
    Bi-GRU 출력 시퀀스에 대한 프레임 어텐션 풀링.

    u가 주어지면 score_t = w·tanh(h_t U + b) (MLP), 없으면 score_t = w·h_t (linear)입니다.
    β = softmax_t(score), v = Σ_t β_t h_t.

    Args:
        h (Tensor): B × T × 2H.
        w (Tensor): 점수 벡터 (H_att 또는 2H).
        u (Optional[Tensor]): 2H × H_att 은닉 행렬.
        b (Optional[Tensor]): H_att 바이어스.

    Returns:
        Tuple[Tensor, Tensor]: (v: B × 2H, β: B × T).
    """
    if h.ndim != 3:
        raise ShapeError(f"RNN 어텐션 입력은 B × T × 2H여야 합니다: {h.shape}")
    batch, steps, _ = h.shape
    hidden = ad.tanh(ad.add(ad.matmul(h, u), b)) if u is not None else h
    if hidden.shape[-1] != w.shape[0]:
        raise ShapeError(f"어텐션 점수 벡터 형태 불일치: {w.shape} vs {hidden.shape}")
    scores = ad.sum(ad.mul(hidden, w), axis=-1)
    beta = ad.softmax(scores, axis=1)
    v = ad.sum(ad.mul(h, ad.reshape(beta, (batch, steps, 1))), axis=1)
    return v, beta


def head_without_attention(h: Tensor) -> Tensor:
    """어텐션 없는 기준 모델의 출력: [→h_T, ←h_1] (B × 2H)"""
    if h.ndim != 3 or h.shape[-1] % 2:
        raise ShapeError(f"Bi-GRU 출력은 B × T × 2H여야 합니다: {h.shape}")
    half = h.shape[-1] // 2
    return ad.concat([h[:, -1, :half], h[:, 0, half:]], axis=-1)


class AcrnnModel:
    """
    ACRNN 네트워크와 파라미터 집합.

    Args:
        cfg (AcrnnConfig): 구조 설정. 파라미터는 0(감마는 1)으로 생성되며
            가중치 초기화는 trainer.init_weights가 담당합니다.
    """

    def __init__(self, cfg: AcrnnConfig):
        self.cfg = cfg
        dtype = cfg.numpy_dtype
        self.convs: Dict[str, Conv2D] = OrderedDict()
        self.norms: Dict[str, BatchNorm] = OrderedDict()

        channels = INPUT_CHANNELS
        site_channels = {}
        for block, filters in zip(CONV_BLOCKS, cfg.conv_filters):
            for name in block.layers:
                self.convs[name] = Conv2D(f"{name}.conv", block.kernel, channels, filters, dtype)
                self.norms[name] = BatchNorm(f"{name}.bn", filters, cfg.bn_momentum, cfg.bn_eps, dtype)
                site_channels[name] = filters
                channels = filters

        self.cnn_att: Optional[Conv2D] = None
        if cfg.has_cnn_attention:
            self.cnn_att = Conv2D(f"{cfg.attention_site}.att", (3, 3), site_channels[cfg.attention_site], 1, dtype)

        bands, _ = cfg.feature_map_size()
        hidden = cfg.gru_hidden
        self.gru1 = BiGRU("l9", bands * cfg.conv_filters[-1], hidden, dtype)
        self.gru2 = BiGRU("l10", 2 * hidden, hidden, dtype)

        self.att_params: Dict[str, Param] = OrderedDict()
        if cfg.attention_site == "l10":
            if cfg.rnn_attention_score == "mlp":
                self.att_params["U"] = Param("l10.att.U", (2 * hidden, cfg.attention_hidden), "weight", dtype)
                self.att_params["b"] = Param("l10.att.b", (cfg.attention_hidden,), "bias", dtype)
                self.att_params["w"] = Param("l10.att.w", (cfg.attention_hidden,), "weight", dtype)
            else:
                self.att_params["w"] = Param("l10.att.w", (2 * hidden,), "weight", dtype)

        self.classifier = Dense("head.dense", 2 * hidden, cfg.num_classes, dtype)

    # ------------------------------------------------------------------
    # 파라미터 / 상태
    # ------------------------------------------------------------------

    def layers(self) -> List[Layer]:
        items: List[Layer] = []
        for name in self.convs:
            items += [self.convs[name], self.norms[name]]
        if self.cnn_att is not None:
            items.append(self.cnn_att)
        items += [self.gru1, self.gru2, self.classifier]
        return items

    def parameters(self) -> List[Param]:
        params: List[Param] = []
        for layer in self.layers():
            params += layer.parameters()
        params += list(self.att_params.values())
        return params

    def param_count(self) -> int:
        """실제 할당된 파라미터 원소 수"""
        return sum(p.size for p in self.parameters())

    def buffers(self) -> Dict[str, np.ndarray]:
        arrays: Dict[str, np.ndarray] = OrderedDict()
        for norm in self.norms.values():
            arrays.update(norm.buffers())
        return arrays

    def state_dict(self) -> Dict[str, np.ndarray]:
        """파라미터 + 배치 정규화 이동 통계 (이름 → 배열)"""
        state: Dict[str, np.ndarray] = OrderedDict((p.name, p.value) for p in self.parameters())
        state.update(self.buffers())
        return state

    def load_state_dict(self, arrays: Mapping[str, np.ndarray]) -> None:
        """
        이름별 배열을 불러옵니다.

        Raises:
            ShapeError: 이름이 빠졌거나 형태가 다른 경우.
        """
        expected = self.state_dict()
        missing = [name for name in expected if name not in arrays]
        if missing:
            raise ShapeError(f"상태에 누락된 텐서가 있습니다: {missing[:5]}")
        for param in self.parameters():
            param.value = arrays[param.name]
        for norm in self.norms.values():
            norm.load_buffers(arrays)

    def zero_grad(self) -> None:
        for param in self.parameters():
            param.tensor.zero_grad()

    # ------------------------------------------------------------------
    # 순전파
    # ------------------------------------------------------------------

    def _check_input(self, x: Union[Tensor, np.ndarray]) -> Tensor:
        data = x.data if isinstance(x, Tensor) else np.asarray(x)
        want = (self.cfg.input_frames, self.cfg.input_bands, INPUT_CHANNELS)
        if data.ndim != 4 or data.shape[1:] != want:
            raise ShapeError(f"입력 형태는 B × {want}여야 합니다: {data.shape}")
        if isinstance(x, Tensor):
            return x
        return Tensor(data.astype(self.cfg.numpy_dtype, copy=False))

    def forward(
        self,
        x: Union[Tensor, np.ndarray],
        training: bool = False,
        rng: Optional[np.random.Generator] = None,
        record_attention: bool = False,
        trace: Optional[List[TraceEntry]] = None,
    ) -> Tuple[Tensor, Optional[AttentionRecord]]:
        """
        l1..l10 + 어텐션 + dense 순전파.

        Args:
            x: B × 시간 × 밴드 × 2 정규화된 세그먼트 배치.
            training (bool): 학습 모드 (배치 통계 BN, dropout 활성).
            rng (Optional[np.random.Generator]): dropout 난수 생성기 (학습 모드 필수).
            record_attention (bool): 어텐션 가중치 기록 여부.
            trace (Optional[List[TraceEntry]]): 단계별 형태를 기록할 리스트.

        Returns:
            Tuple[Tensor, Optional[AttentionRecord]]: (B × num_classes logits, 어텐션 기록).
        """
        cfg = self.cfg
        h = ad.transpose(self._check_input(x), (0, 2, 1, 3))
        attention: Optional[Tensor] = None

        for block in CONV_BLOCKS:
            for name in block.layers:
                h = ad.relu(self.norms[name](self.convs[name](h), training))
                if cfg.attention_site == name:
                    h, attention = cnn_attention(
                        h, cfg.cnn_attention_scaling, self.cnn_att.weight.tensor, self.cnn_att.bias.tensor
                    )
            h = maxpool2d(h, block.pool)
            if trace is not None:
                trace.append(TraceEntry(stage=f"{block.layers[1]}-pool", shape=h.shape[1:]))

        batch, bands, frames, channels = h.shape
        seq = ad.reshape(ad.transpose(h, (0, 2, 1, 3)), (batch, frames, bands * channels))
        if trace is not None:
            trace.append(TraceEntry(stage="sequence", shape=seq.shape[1:]))

        seq = dropout(self.gru1(seq), cfg.dropout_p, training, rng)
        if trace is not None:
            trace.append(TraceEntry(stage="l9", shape=seq.shape[1:]))
        seq = dropout(self.gru2(seq), cfg.dropout_p, training, rng)
        if trace is not None:
            trace.append(TraceEntry(stage="l10", shape=seq.shape[1:]))

        if cfg.attention_site == "l10":
            p = self.att_params
            pooled, attention = rnn_attention(
                seq,
                p["w"].tensor,
                p["U"].tensor if "U" in p else None,
                p["b"].tensor if "b" in p else None,
            )
        else:
            pooled = head_without_attention(seq)
        if trace is not None:
            trace.append(TraceEntry(stage="pooled", shape=pooled.shape[1:]))

        logits = self.classifier(pooled)
        if trace is not None:
            trace.append(TraceEntry(stage="logits", shape=logits.shape[1:]))

        record = None
        if record_attention and attention is not None:
            weights = attention.data.reshape(batch, -1)
            scaling = "softmax" if cfg.attention_site == "l10" else cfg.cnn_attention_scaling
            record = AttentionRecord(site=cfg.attention_site, scaling=scaling, weights=weights.copy())
        return logits, record

    def __call__(self, x, training: bool = False, rng: Optional[np.random.Generator] = None) -> Tensor:
        logits, _ = self.forward(x, training=training, rng=rng)
        return logits

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        """평가 모드 softmax 확률 (B × num_classes)"""
        logits, _ = self.forward(x, training=False)
        return ad.softmax(logits, axis=-1).data
