"""학습/평가 설정 및 결과 스키마"""

from pydantic import BaseModel, ConfigDict, Field, model_validator
from typing import Dict, List, Optional

import numpy as np

from ..audio_module.schemas import MixupConfig
from ..feature_module.schemas import FeatureConfig, NormStats
from ..model_module.schemas import AcrnnConfig


class TrainConfig(BaseModel):
    """SGD-Nesterov 학습 설정 (기본값: 300 에폭, 100 에폭마다 학습률 1/10)."""
    epochs: int = Field(300, ge=1, description="학습 에폭 수")
    batch_size: int = Field(64, ge=1, description="배치 크기")
    lr_initial: float = Field(0.01, gt=0, description="초기 학습률")
    lr_decay_factor: float = Field(10.0, gt=0, description="감쇠 시 나누는 값")
    lr_decay_every: int = Field(100, ge=1, description="감쇠 주기 (에폭)")
    momentum: float = Field(0.9, ge=0.0, lt=1.0, description="Nesterov 모멘텀")
    l2: float = Field(1e-4, ge=0.0, description="L2 정규화 계수 (weight에만 적용)")
    init_std: float = Field(0.05, gt=0, description="가중치 초기화 표준편차")
    seed: int = Field(0, description="학습 난수 시드")
    mixup: MixupConfig = Field(default_factory=MixupConfig, description="mixup 설정")
    record_batch_losses: bool = Field(False, description="배치별 손실 기록 여부")


class EpochRecord(BaseModel):
    epoch: int = Field(..., ge=0)
    lr: float = Field(..., description="해당 에폭 학습률")
    mean_loss: float = Field(..., description="배치 손실 평균")
    train_accuracy: float = Field(..., description="학습 모드 배치 예측 정확도 (mixup 전 라벨 기준)")
    batches: int = Field(..., ge=1)
    batch_losses: Optional[List[float]] = Field(None, description="배치별 손실")


class TrainHistory(BaseModel):
    """에폭별 학습 기록."""
    epochs: List[EpochRecord] = Field(default_factory=list)

    @property
    def losses(self) -> List[float]:
        return [r.mean_loss for r in self.epochs]

    def summary(self) -> dict:
        last = self.epochs[-1] if self.epochs else None
        return {
            "epochs": len(self.epochs),
            "final_loss": last.mean_loss if last else None,
            "final_train_accuracy": last.train_accuracy if last else None,
        }


class ClipPrediction(BaseModel):
    clip_id: str
    true_class: int
    predicted_class: int
    probabilities: List[float]
    num_segments: int = Field(..., ge=1)


class EvalReport(BaseModel):
    """클립 단위 평가 결과. accuracy는 trace(confusion) / sum(confusion)과 정확히 같습니다."""
    num_classes: int = Field(..., ge=2)
    predictions: List[ClipPrediction]
    accuracy: float = Field(..., ge=0.0, le=1.0)
    per_class_accuracy: List[Optional[float]] = Field(..., description="클래스별 정확도 (표본 없으면 None)")
    confusion: List[List[int]] = Field(..., description="confusion[true][pred]")

    @model_validator(mode="after")
    def _check_confusion(self) -> "EvalReport":
        matrix = np.asarray(self.confusion)
        if matrix.shape != (self.num_classes, self.num_classes):
            raise ValueError(f"confusion 행렬 형태 오류: {matrix.shape}")
        return self

    def summary(self) -> dict:
        return {"accuracy": self.accuracy, "clips": len(self.predictions)}


class FoldResult(BaseModel):
    fold: int = Field(..., ge=1)
    norm_stats: NormStats
    report: EvalReport
    history: TrainHistory
    train_segments: int = Field(..., ge=1)


class CrossValidationReport(BaseModel):
    """폴드별 결과와 평균 정확도."""
    setting: str = Field("", description="어블레이션 설정 라벨")
    folds: List[FoldResult]
    mean_accuracy: float

    @property
    def fold_accuracies(self) -> Dict[int, float]:
        return {f.fold: f.report.accuracy for f in self.folds}

    def summary(self) -> dict:
        return {"setting": self.setting, "mean_accuracy": self.mean_accuracy, "folds": self.fold_accuracies}


class CheckpointMeta(BaseModel):
    """체크포인트 JSON 블롭."""
    model: AcrnnConfig
    features: Optional[FeatureConfig] = None
    class_names: List[str] = Field(default_factory=list)


class Checkpoint(BaseModel):
    """직렬화 가능한 모델 상태 (이름별 텐서 + BN 이동 통계 + 정규화 통계 + 설정)."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    meta: CheckpointMeta
    norm_stats: NormStats
    epoch: int = Field(0, ge=0)
    tensors: Dict[str, np.ndarray] = Field(default_factory=dict)

    @property
    def model_cfg(self) -> AcrnnConfig:
        return self.meta.model

    def summary(self) -> dict:
        return {"setting": self.meta.model.setting_label, "epoch": self.epoch, "tensors": len(self.tensors)}
