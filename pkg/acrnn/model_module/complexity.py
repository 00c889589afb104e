"""
ACRNN 파라미터 / FLOPs 분석 카운터

FLOPs 규칙: 곱셈-누산 = 2, 바이어스 덧셈 = 1, 배치 정규화 = 원소당 2,
ReLU / 풀링 비교 / 활성화 함수는 세지 않습니다. 어텐션 비용은 별도 행으로 보고합니다.
"""

from typing import List

from ..resources.reference_values import ACRNN_REFERENCE, BASELINE_CNN_REFERENCE
from .schemas import CONV_BLOCKS, AcrnnConfig, ComplexityReport, ComplexityRow

INPUT_CHANNELS = 2


def conv_flops(kernel, cin: int, cout: int, out_h: int, out_w: int) -> int:
    kh, kw = kernel
    return 2 * kh * kw * cin * cout * out_h * out_w + cout * out_h * out_w


def gru_step_flops(input_dim: int, hidden: int) -> int:
    """한 방향 한 스텝: 게이트 3개의 matmul + bias, 그리고 r⊙h, (1−z)⊙h + z⊙h̃ 원소 연산"""
    return 3 * (2 * (input_dim + hidden) * hidden + hidden) + 5 * hidden


def _rows(cfg: AcrnnConfig) -> List[ComplexityRow]:
    rows: List[ComplexityRow] = []
    bands, frames = cfg.input_bands, cfg.input_frames
    channels = INPUT_CHANNELS

    for block, filters in zip(CONV_BLOCKS, cfg.conv_filters):
        for name in block.layers:
            params = block.kernel[0] * block.kernel[1] * channels * filters + filters + 2 * filters
            flops = conv_flops(block.kernel, channels, filters, bands, frames) + 2 * bands * frames * filters
            rows.append(ComplexityRow(layer=name, params=params, flops=flops))
            if cfg.attention_site == name:
                att_flops = (
                    conv_flops((3, 3), filters, 1, bands, frames)
                    + bands * frames          # 주파수 평균
                    + bands * frames * filters  # M·A
                )
                rows.append(
                    ComplexityRow(layer=f"{name}.att", params=9 * filters + 1, flops=att_flops, attention=True)
                )
            channels = filters
        bands //= block.pool[0]
        frames //= block.pool[1]

    hidden = cfg.gru_hidden
    steps = frames
    input_dim = bands * channels
    for name in ("l9", "l10"):
        params = 2 * (3 * (input_dim + hidden) * hidden + 3 * hidden)
        flops = 2 * steps * gru_step_flops(input_dim, hidden)
        rows.append(ComplexityRow(layer=name, params=params, flops=flops))
        input_dim = 2 * hidden

    width = 2 * hidden
    if cfg.attention_site == "l10":
        weighted_sum = 2 * steps * width
        if cfg.rnn_attention_score == "mlp":
            att_hidden = cfg.attention_hidden
            params = width * att_hidden + att_hidden + att_hidden
            flops = steps * (2 * width * att_hidden + att_hidden) + steps * 2 * att_hidden + weighted_sum
        else:
            params = width
            flops = steps * 2 * width + weighted_sum
        rows.append(ComplexityRow(layer="l10.att", params=params, flops=flops, attention=True))

    rows.append(
        ComplexityRow(
            layer="dense",
            params=width * cfg.num_classes + cfg.num_classes,
            flops=2 * width * cfg.num_classes + cfg.num_classes,
        )
    )
    return rows


def count_params_by_layer(cfg: AcrnnConfig) -> List[ComplexityRow]:
    """층별 파라미터/FLOPs 행"""
    return _rows(cfg)


def count_params(cfg: AcrnnConfig) -> int:
    """
    분석적 파라미터 수. AcrnnModel(cfg).param_count()와 정확히 같습니다.

    Args:
        cfg (AcrnnConfig): 모델 설정.

    Returns:
        int: 전체 파라미터 수.
    """
    return sum(r.params for r in _rows(cfg))


def count_flops(cfg: AcrnnConfig) -> ComplexityReport:
    """
    세그먼트 하나의 순전파 FLOPs 보고서 (층별 행 + 공개 참고 수치).

    Args:
        cfg (AcrnnConfig): 모델 설정.

    Returns:
        ComplexityReport: total_flops / attention_flops 속성으로 합계를 제공합니다.
    """
    return ComplexityReport(
        setting=cfg.setting_label,
        rows=_rows(cfg),
        reference={"acrnn": ACRNN_REFERENCE, "baseline_cnn": BASELINE_CNN_REFERENCE},
    )
