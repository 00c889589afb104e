"""오디오 증강 설정 스키마 (mixup, time stretch / pitch shift)"""

from pydantic import BaseModel, Field, model_validator
from typing import Tuple


class MixupConfig(BaseModel):
    """특징 공간 mixup 설정. λ ~ Beta(alpha, alpha)."""
    alpha: float = Field(0.2, gt=0, description="Beta 분포 파라미터")
    enabled: bool = Field(True, description="mixup 사용 여부")


class AugmentPlan(BaseModel):
    """원시 오디오 오프라인 증강 계획 (time stretch / pitch shift)."""
    stretch_range: Tuple[float, float] = Field((0.8, 1.3), description="time stretch 배율 범위")
    pitch_range_semitones: Tuple[float, float] = Field((-3.5, 3.5), description="pitch shift 반음 범위")
    copies_per_clip: int = Field(2, ge=0, description="클립당 증강 사본 수")
    seed: int = Field(0, description="증강 난수 시드")

    @model_validator(mode="after")
    def _check_ranges(self) -> "AugmentPlan":
        lo, hi = self.stretch_range
        if not 0.5 <= lo <= hi <= 2.0:
            raise ValueError(f"stretch_range는 [0.5, 2.0] 안의 오름차순 구간이어야 합니다: {self.stretch_range}")
        lo, hi = self.pitch_range_semitones
        if not -12.0 <= lo <= hi <= 12.0:
            raise ValueError(f"pitch_range_semitones는 [-12, 12] 안의 오름차순 구간이어야 합니다: {self.pitch_range_semitones}")
        return self
