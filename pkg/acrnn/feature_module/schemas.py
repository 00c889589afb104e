"""Log-GTs 특징 추출 데이터 스키마"""

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from typing import List, Optional

import numpy as np

from ..shared.schemas import ClipMeta

# 표준편차 하한
STD_FLOOR = 1e-8


class StftConfig(BaseModel):
    """STFT 설정 (기본값: 44.1kHz에서 23ms Hamming 윈도우, 50% overlap)."""
    window_len: int = Field(1024, gt=0, description="윈도우 길이 (샘플)")
    hop: int = Field(512, gt=0, description="홉 길이 (샘플)")
    window: str = Field("hamming", description="윈도우 함수 이름")

    @model_validator(mode="after")
    def _check_hop(self) -> "StftConfig":
        if self.hop > self.window_len:
            raise ValueError(f"hop({self.hop})은 window_len({self.window_len}) 이하여야 합니다")
        return self

    @property
    def num_bins(self) -> int:
        """단측 주파수 빈 수 (window_len/2 + 1)"""
        return self.window_len // 2 + 1


class FeatureConfig(BaseModel):
    """클립 → Log-GTs 세그먼트 변환 전체 설정."""
    sample_rate_hz: int = Field(44100, gt=0, description="표준 샘플링 레이트")
    stft: StftConfig = Field(default_factory=StftConfig, description="STFT 설정")
    num_bands: int = Field(128, ge=2, description="감마톤 밴드 수")
    f_min_hz: float = Field(20.0, gt=0, description="최저 중심 주파수 범위 하한 (Hz)")
    log_eps: float = Field(1e-10, gt=0, description="로그 변환 epsilon")
    delta_half_window: int = Field(2, ge=1, description="델타 회귀 반창 N")
    frames_per_segment: int = Field(128, gt=0, description="세그먼트당 프레임 수")
    overlap: float = Field(0.5, ge=0.0, lt=1.0, description="세그먼트 중첩 비율")

    @property
    def segment_hop(self) -> int:
        """세그먼트 시작 간격 (프레임)"""
        return max(1, int(round(self.frames_per_segment * (1.0 - self.overlap))))


class GammatoneBank(BaseModel):
    """FFT 빈 영역에서 표현한 감마톤 필터뱅크 가중치 (불변)."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    num_bands: int = Field(..., ge=2, description="밴드 수")
    weights: np.ndarray = Field(..., description="num_bands × num_bins 가중치 행렬")
    center_freqs_hz: np.ndarray = Field(..., description="오름차순 중심 주파수 (Hz)")
    sample_rate_hz: int = Field(..., gt=0, description="설계 샘플링 레이트")

    @property
    def num_bins(self) -> int:
        return int(self.weights.shape[1])


class Spectrogram(BaseModel):
    """프레임 × 밴드 스펙트로그램 (에너지 또는 로그 영역)."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    values: np.ndarray = Field(..., description="num_frames × num_bands 값")
    frame_rate_hz: float = Field(..., gt=0, description="프레임 레이트 (Hz)")
    log_domain: bool = Field(False, description="로그 영역 여부")

    @field_validator("values", mode="before")
    @classmethod
    def _check_values(cls, value: np.ndarray) -> np.ndarray:
        value = np.asarray(value, dtype=np.float64)
        if value.ndim != 2:
            raise ValueError(f"2차원 행렬이어야 합니다: shape={value.shape}")
        if not np.all(np.isfinite(value)):
            raise ValueError("스펙트로그램에 NaN/Inf가 포함되어 있습니다")
        return value

    @property
    def num_frames(self) -> int:
        return int(self.values.shape[0])


class LogGtSegment(BaseModel):
    """
    네트워크 입력 X: 시간 × 밴드 × 2(static, delta) Log-GTs 세그먼트.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    data: np.ndarray = Field(..., description="frames × bands × 2 특징 텐서")
    clip: Optional[ClipMeta] = Field(None, description="원본 클립 메타데이터")
    segment_index: int = Field(0, ge=0, description="클립 내 세그먼트 순번")
    provenance: str = Field("original", description="'original' 또는 증강 변환 설명")

    @field_validator("data", mode="before")
    @classmethod
    def _check_data(cls, value: np.ndarray) -> np.ndarray:
        value = np.asarray(value)
        if value.ndim != 3 or value.shape[2] != 2:
            raise ValueError(f"frames × bands × 2 형태여야 합니다: shape={value.shape}")
        if not np.all(np.isfinite(value)):
            raise ValueError("세그먼트에 NaN/Inf가 포함되어 있습니다")
        return value

    @property
    def clip_id(self) -> str:
        """클립 단위 집계 키 (증강 사본은 provenance를 포함)"""
        path = self.clip.path if self.clip else "<unknown>"
        return path if self.provenance == "original" else f"{path}|{self.provenance}"

    @property
    def class_id(self) -> int:
        return self.clip.class_id if self.clip else -1

    @property
    def fold(self) -> int:
        return self.clip.fold if self.clip else 0

    @property
    def is_original(self) -> bool:
        return self.provenance == "original"


class NormStats(BaseModel):
    """학습 세트 전역 채널별 평균/표준편차."""
    mean: List[float] = Field(..., min_length=2, max_length=2, description="채널별 평균 (static, delta)")
    std: List[float] = Field(..., min_length=2, max_length=2, description="채널별 표준편차 (static, delta)")

    @field_validator("std")
    @classmethod
    def _floor_std(cls, value: List[float]) -> List[float]:
        return [max(float(s), STD_FLOOR) for s in value]
