"""오디오 입력·데이터셋 공통 데이터 스키마"""

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from typing import Dict, List, Optional

import numpy as np


class AudioClip(BaseModel):
    """
    모노 PCM 오디오 클립.
    원시 신호 단계의 모든 모듈(audio_io, augmentation, feature)에서 공통으로 사용됩니다.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    samples: np.ndarray = Field(..., description="[-1, 1] 범위의 모노 샘플 (float64)")
    sample_rate_hz: int = Field(..., gt=0, description="샘플링 레이트 (Hz)")

    @field_validator("samples", mode="before")
    @classmethod
    def _check_samples(cls, value: np.ndarray) -> np.ndarray:
        value = np.asarray(value, dtype=np.float64)
        if value.ndim != 1:
            raise ValueError(f"모노 1차원 샘플이어야 합니다: shape={value.shape}")
        if value.size == 0:
            raise ValueError("샘플이 비어 있습니다")
        if not np.all(np.isfinite(value)):
            raise ValueError("샘플에 NaN/Inf가 포함되어 있습니다")
        return value

    @property
    def duration_sec(self) -> float:
        """클립 길이 (초)"""
        return self.samples.size / self.sample_rate_hz


class ClipMeta(BaseModel):
    """
    데이터셋 매니페스트의 클립 한 개에 대한 메타데이터.
    """
    path: str = Field(..., description="오디오 파일 경로 (매니페스트 루트 기준 파일명)")
    fold: int = Field(..., ge=1, description="교차 검증 폴드 번호 (1..K)")
    class_id: int = Field(..., ge=0, description="연속 클래스 ID (0..num_classes-1)")
    class_name: str = Field("", description="클래스 이름 (예: dog, rain)")


class DatasetManifest(BaseModel):
    """
    폴드 정보를 포함한 데이터셋 클립 목록.
    """
    root: str = Field("", description="데이터셋 루트 디렉토리")
    clips: List[ClipMeta] = Field(default_factory=list, description="클립 메타데이터 리스트")
    num_classes: int = Field(..., gt=0, description="클래스 수")
    num_folds: int = Field(..., gt=0, description="폴드 수")

    @model_validator(mode="after")
    def _check_invariants(self) -> "DatasetManifest":
        paths = [c.path for c in self.clips]
        if len(paths) != len(set(paths)):
            raise ValueError("중복된 클립 경로가 있습니다")
        for clip in self.clips:
            if clip.fold > self.num_folds:
                raise ValueError(f"폴드 범위를 벗어났습니다: {clip.path} (fold={clip.fold})")
            if clip.class_id >= self.num_classes:
                raise ValueError(f"클래스 범위를 벗어났습니다: {clip.path} (class_id={clip.class_id})")
        missing = set(range(self.num_classes)) - {c.class_id for c in self.clips}
        if missing:
            raise ValueError(f"클립이 없는 클래스가 있습니다: {sorted(missing)}")
        return self

    @property
    def class_names(self) -> Dict[int, str]:
        """클래스 ID → 클래스 이름 테이블"""
        return {c.class_id: c.class_name for c in sorted(self.clips, key=lambda c: c.class_id)}


class ErrorResponse(BaseModel):
    """
    API 에러 응답 모델.
    """
    success: bool = Field(False, description="성공 여부 (항상 False)")
    error: str = Field(..., description="에러 메시지 요약")
    detail: Optional[str] = Field(None, description="상세 에러 내용 (디버깅용)")

class HealthResponse(BaseModel):
    """
    서버 상태 확인 응답 모델.
    """
    status: str = Field(..., description="서버 상태 ('healthy' 또는 'unhealthy')")
    version: str = Field(..., description="API 버전")
    model_loaded: bool = Field(False, description="체크포인트 로드 여부")


class ClassifyRequest(BaseModel):
    """
    클립 분류 요청 모델.
    """
    clip_path: str = Field(..., description="서버에서 읽을 수 있는 오디오 파일 경로")


class ClassifyResponse(BaseModel):
    """
    클립 분류 결과 모델.
    """
    predicted_class: int = Field(..., description="예측 클래스 ID")
    predicted_name: str = Field("", description="예측 클래스 이름")
    probabilities: List[float] = Field(..., description="세그먼트 평균 클래스 분포")
    num_segments: int = Field(..., ge=1, description="투표에 사용된 세그먼트 수")
    attention_site: Optional[str] = Field(None, description="어텐션 위치 (없으면 None)")
    attention: Optional[List[List[float]]] = Field(None, description="세그먼트별 프레임 어텐션 가중치")
