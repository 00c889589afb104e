"""ACRNN 모델 설정 / 레이어 명세 / 어텐션 기록 / 복잡도 보고 스키마"""

from pydantic import BaseModel, ConfigDict, Field, model_validator
from typing import List, Literal, Optional, Tuple

import numpy as np

AttentionSite = Literal["none", "l2", "l4", "l6", "l8", "l10"]
CNN_ATTENTION_SITES = ("l2", "l4", "l6", "l8")


class ConvBlockSpec(BaseModel):
    """conv→bn→relu 두 층 + max-pooling 한 블록."""
    model_config = ConfigDict(frozen=True)

    layers: Tuple[str, str] = Field(..., description="블록을 구성하는 층 이름")
    kernel: Tuple[int, int] = Field(..., description="(밴드, 프레임) 커널 크기")
    pool: Tuple[int, int] = Field(..., description="(밴드, 프레임) 풀링 크기 = stride")


# l1–l8: 커널은 (주파수, 시간) 순서
CONV_BLOCKS: Tuple[ConvBlockSpec, ...] = (
    ConvBlockSpec(layers=("l1", "l2"), kernel=(3, 5), pool=(4, 3)),
    ConvBlockSpec(layers=("l3", "l4"), kernel=(3, 1), pool=(4, 1)),
    ConvBlockSpec(layers=("l5", "l6"), kernel=(1, 5), pool=(1, 3)),
    ConvBlockSpec(layers=("l7", "l8"), kernel=(3, 3), pool=(2, 2)),
)
RNN_LAYERS = ("l9", "l10")


class AcrnnConfig(BaseModel):
    """ACRNN 구조와 어텐션 배치 설정."""
    num_classes: int = Field(50, ge=2, description="클래스 수")
    attention_site: AttentionSite = Field("l10", description="어텐션 적용 위치")
    cnn_attention_scaling: Literal["softmax", "sigmoid"] = Field("sigmoid", description="CNN 어텐션 스케일링 함수")
    rnn_attention_score: Literal["mlp", "linear"] = Field("mlp", description="l10 어텐션 점수 함수")
    dropout_p: float = Field(0.5, ge=0.0, lt=1.0, description="Bi-GRU 출력 dropout 확률")
    gru_hidden: int = Field(256, ge=1, description="GRU 셀 수 (방향당)")
    attention_hidden: int = Field(128, ge=1, description="l10 MLP 어텐션 은닉 크기")
    conv_filters: Tuple[int, int, int, int] = Field((32, 64, 128, 256), description="블록별 필터 수")
    input_frames: int = Field(128, ge=1, description="세그먼트 프레임 수 (시간)")
    input_bands: int = Field(128, ge=1, description="감마톤 밴드 수 (주파수)")
    bn_momentum: float = Field(0.99, gt=0.0, lt=1.0, description="배치 정규화 이동 평균 계수")
    bn_eps: float = Field(1e-5, gt=0.0, description="배치 정규화 epsilon")
    dtype: Literal["float32", "float64"] = Field("float32", description="연산 정밀도")
    seed: int = Field(0, description="모델 난수 시드")

    @model_validator(mode="after")
    def _check_trace(self) -> "AcrnnConfig":
        bands, frames = self.feature_map_size()
        if bands < 1 or frames < 1:
            raise ValueError(
                f"입력 {self.input_bands}×{self.input_frames}은 풀링 후 크기가 0이 됩니다"
            )
        if any(f < 1 for f in self.conv_filters):
            raise ValueError(f"conv_filters는 모두 양수여야 합니다: {self.conv_filters}")
        return self

    def feature_map_size(self) -> Tuple[int, int]:
        """l8 풀링 이후 (주파수, 시간) 크기"""
        bands, frames = self.input_bands, self.input_frames
        for block in CONV_BLOCKS:
            bands //= block.pool[0]
            frames //= block.pool[1]
        return bands, frames

    @property
    def has_cnn_attention(self) -> bool:
        return self.attention_site in CNN_ATTENTION_SITES

    @property
    def has_attention(self) -> bool:
        return self.attention_site != "none"

    @property
    def numpy_dtype(self):
        return np.dtype(self.dtype)

    @property
    def setting_label(self) -> str:
        """어블레이션 표 라벨 (예: "l4-softmax", "l10-mlp", "none")"""
        if self.has_cnn_attention:
            return f"{self.attention_site}-{self.cnn_attention_scaling}"
        if self.attention_site == "l10":
            return f"l10-{self.rnn_attention_score}"
        return "none"


def ablation_grid(base: AcrnnConfig) -> List[AcrnnConfig]:
    """
    어텐션 위치/스케일링 어블레이션 11개 설정.

    none, l2/l4/l6/l8 × {softmax, sigmoid}, l10(mlp), l10(linear)
    """
    settings = [base.model_copy(update={"attention_site": "none"})]
    for site in CNN_ATTENTION_SITES:
        for scaling in ("softmax", "sigmoid"):
            settings.append(base.model_copy(update={"attention_site": site, "cnn_attention_scaling": scaling}))
    for score in ("mlp", "linear"):
        settings.append(base.model_copy(update={"attention_site": "l10", "rnn_attention_score": score}))
    return settings


class AttentionRecord(BaseModel):
    """
    시각화용 어텐션 기록.

    CNN 위치는 해당 층 시간축 길이 T의 A, l10은 GRU 시퀀스 길이 T의 β입니다.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    site: AttentionSite = Field(..., description="어텐션 위치")
    scaling: str = Field(..., description="softmax | sigmoid")
    weights: np.ndarray = Field(..., description="B × T 프레임 가중치")

    def summary(self) -> dict:
        return {"site": self.site, "scaling": self.scaling, "shape": list(self.weights.shape)}


class TraceEntry(BaseModel):
    """순전파 단계별 형태 기록 (배치 축 제외)"""
    stage: str
    shape: Tuple[int, ...]


class ComplexityRow(BaseModel):
    layer: str = Field(..., description="층 이름")
    params: int = Field(0, ge=0, description="파라미터 수")
    flops: int = Field(0, ge=0, description="순전파 FLOPs (MAC = 2)")
    attention: bool = Field(False, description="어텐션 오버헤드 행 여부")


class ComplexityReport(BaseModel):
    """층별 파라미터/FLOPs와 합계."""
    setting: str
    rows: List[ComplexityRow]
    reference: Optional[dict] = Field(None, description="공개된 참고 수치")

    @property
    def total_params(self) -> int:
        return sum(r.params for r in self.rows)

    @property
    def total_flops(self) -> int:
        return sum(r.flops for r in self.rows)

    @property
    def attention_params(self) -> int:
        return sum(r.params for r in self.rows if r.attention)

    @property
    def attention_flops(self) -> int:
        return sum(r.flops for r in self.rows if r.attention)
