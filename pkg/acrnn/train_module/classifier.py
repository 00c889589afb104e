"""
체크포인트 기반 클립 분류기
- 오디오 로드 → Log-GTs 추출 → 정규화 → 세그먼트 확률 평균 투표 (+ 어텐션 가중치)
"""

import logging
from pathlib import Path
from typing import Union

import numpy as np

from ..audio_module.audio_io import load_clip
from ..feature_module.extractor import FeatureExtractor, apply_norm
from ..feature_module.schemas import FeatureConfig
from ..model_module import autodiff as ad
from ..shared.schemas import ClassifyResponse
from .checkpoint import load_checkpoint, model_from_checkpoint
from .evaluator import average_segment_probabilities
from .schemas import Checkpoint

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class ClipClassifier:
    """
    학습된 체크포인트로 단일 클립을 분류하는 클래스.

    모델과 필터뱅크는 생성 시 한 번만 만들어집니다.
    """

    def __init__(self, checkpoint: Checkpoint):
        self.checkpoint = checkpoint
        self.model = model_from_checkpoint(checkpoint)
        self.feature_cfg = checkpoint.meta.features or FeatureConfig()
        self.extractor = FeatureExtractor(self.feature_cfg)
        self.class_names = checkpoint.meta.class_names
        logger.info(f"ClipClassifier 초기화 - 설정 {checkpoint.model_cfg.setting_label}, 클래스 {checkpoint.model_cfg.num_classes}개")

    @classmethod
    def from_path(cls, path: PathLike) -> "ClipClassifier":
        return cls(load_checkpoint(path))

    def classify(self, clip_path: PathLike) -> ClassifyResponse:
        """
        오디오 파일 하나를 분류합니다.

        Args:
            clip_path (PathLike): 오디오 파일 경로.

        Returns:
            ClassifyResponse: 평균 확률 분포, 예측 클래스, 어텐션 가중치.

        Raises:
            AudioIOError: 파일을 읽을 수 없는 경우.
            FeatureExtractionError: 특징 추출 실패 시.
        """
        clip = load_clip(clip_path, self.feature_cfg.sample_rate_hz)
        segments = [apply_norm(s, self.checkpoint.norm_stats) for s in self.extractor.extract(clip)]
        batch = np.stack([s.data for s in segments]).astype(self.model.cfg.numpy_dtype)
        logits, record = self.model.forward(batch, training=False, record_attention=True)
        probs = ad.softmax(logits, axis=-1).data
        mean, predicted = average_segment_probabilities(probs)

        name = self.class_names[predicted] if predicted < len(self.class_names) else ""
        logger.info(f"분류 완료: {clip_path} → {predicted} ({name})")
        return ClassifyResponse(
            predicted_class=predicted,
            predicted_name=name,
            probabilities=mean.tolist(),
            num_segments=len(segments),
            attention_site=record.site if record else None,
            attention=record.weights.tolist() if record else None,
        )
