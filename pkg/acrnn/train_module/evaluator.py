"""
평가 모듈
- 세그먼트 확률 평균 투표로 클립 단위 예측
- 정확도 / 클래스별 정확도 / confusion 행렬 (scikit-learn)
- 공식 폴드 기준 교차 검증 및 보고서 저장
"""

import csv
import json
import logging
from collections import OrderedDict
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from sklearn.metrics import confusion_matrix

from ..feature_module.extractor import apply_norm, fit_norm
from ..feature_module.schemas import FeatureConfig, LogGtSegment, NormStats
from ..model_module.acrnn import AcrnnModel
from ..model_module.schemas import AcrnnConfig
from ..shared.errors import ArgumentError
from ..shared.logger_utils import log_execution
from .checkpoint import model_from_checkpoint
from .schemas import Checkpoint, ClipPrediction, CrossValidationReport, EvalReport, FoldResult, TrainConfig
from .trainer import train_fold

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
ModelSource = Union[Checkpoint, AcrnnModel]

# 한 번의 순전파에 넣는 최대 세그먼트 수
EVAL_BATCH = 64


def _resolve(source: ModelSource, norm_stats: Optional[NormStats]) -> Tuple[AcrnnModel, Optional[NormStats]]:
    if isinstance(source, Checkpoint):
        return model_from_checkpoint(source), norm_stats or source.norm_stats
    return source, norm_stats


def average_segment_probabilities(probabilities: np.ndarray) -> Tuple[np.ndarray, int]:
    """
    세그먼트별 확률의 산술 평균과 argmax (동률이면 가장 작은 클래스 인덱스).

    Args:
        probabilities (np.ndarray): S × C 세그먼트 확률.

    Returns:
        Tuple[np.ndarray, int]: (C 평균 분포, 예측 클래스).
    """
    probabilities = np.asarray(probabilities, dtype=np.float64)
    if probabilities.ndim != 2 or probabilities.shape[0] == 0:
        raise ArgumentError(f"세그먼트 확률은 비어 있지 않은 S × C 행렬이어야 합니다: {probabilities.shape}")
    mean = probabilities.mean(axis=0)
    return mean, int(np.argmax(mean))


def segment_probabilities(
    model: AcrnnModel, segments: Sequence[LogGtSegment], norm_stats: Optional[NormStats] = None
) -> np.ndarray:
    """평가 모드 세그먼트별 softmax 확률 (S × C)"""
    dtype = model.cfg.numpy_dtype
    rows = []
    for start in range(0, len(segments), EVAL_BATCH):
        chunk = segments[start: start + EVAL_BATCH]
        if norm_stats is not None:
            chunk = [apply_norm(s, norm_stats) for s in chunk]
        batch = np.stack([s.data for s in chunk]).astype(dtype)
        rows.append(model.predict_proba(batch))
    return np.concatenate(rows, axis=0)


def predict_clip(
    source: ModelSource, segments: Sequence[LogGtSegment], norm_stats: Optional[NormStats] = None
) -> np.ndarray:
    """
    클립 세그먼트들의 softmax 확률을 평균한 클래스 분포를 반환합니다.

    Args:
        source (ModelSource): Checkpoint 또는 학습된 AcrnnModel.
        segments (Sequence[LogGtSegment]): 정규화 전 클립 세그먼트 (≥ 1).
        norm_stats (Optional[NormStats]): 정규화 통계 (Checkpoint면 기본값은 체크포인트 값).

    Returns:
        np.ndarray: 클래스 분포. 예측 클래스는 np.argmax 결과입니다.

    Raises:
        ArgumentError: 세그먼트가 없는 경우.
    """
    if not segments:
        raise ArgumentError("예측할 세그먼트가 없습니다")
    model, stats = _resolve(source, norm_stats)
    mean, _ = average_segment_probabilities(segment_probabilities(model, segments, stats))
    return mean


def group_by_clip(segments: Sequence[LogGtSegment]) -> Dict[str, List[LogGtSegment]]:
    """clip_id 기준 그룹 (처음 등장한 순서 유지)"""
    groups: Dict[str, List[LogGtSegment]] = OrderedDict()
    for seg in segments:
        groups.setdefault(seg.clip_id, []).append(seg)
    return groups


@log_execution(module_name="train_eval", step_name="evaluate")
def evaluate(
    source: ModelSource,
    segments: Sequence[LogGtSegment],
    norm_stats: Optional[NormStats] = None,
    num_classes: Optional[int] = None,
    fold: Optional[int] = None,
) -> EvalReport:
    """
    테스트 세그먼트를 클립별로 묶어 투표 예측하고 confusion 행렬을 만듭니다.

    Args:
        source (ModelSource): Checkpoint 또는 학습된 모델.
        segments (Sequence[LogGtSegment]): 테스트 세그먼트.
        norm_stats (Optional[NormStats]): 정규화 통계.
        num_classes (Optional[int]): 클래스 수 (기본값: 모델 설정).
        fold (Optional[int]): 테스트 폴드 번호 (로그 식별용).

    Returns:
        EvalReport: 클립 예측, 정확도, 클래스별 정확도, confusion 행렬.
    """
    if not segments:
        raise ArgumentError("평가할 세그먼트가 없습니다")
    model, stats = _resolve(source, norm_stats)
    num_classes = num_classes or model.cfg.num_classes

    predictions: List[ClipPrediction] = []
    for clip_id, clip_segments in group_by_clip(segments).items():
        probs = segment_probabilities(model, clip_segments, stats)
        mean, predicted = average_segment_probabilities(probs)
        predictions.append(
            ClipPrediction(
                clip_id=clip_id,
                true_class=clip_segments[0].class_id,
                predicted_class=predicted,
                probabilities=mean.tolist(),
                num_segments=len(clip_segments),
            )
        )

    y_true = [p.true_class for p in predictions]
    y_pred = [p.predicted_class for p in predictions]
    matrix = confusion_matrix(y_true, y_pred, labels=list(range(num_classes)))
    support = matrix.sum(axis=1)
    per_class = [float(matrix[c, c] / support[c]) if support[c] else None for c in range(num_classes)]
    accuracy = float(np.trace(matrix)) / float(matrix.sum())

    logger.info(f"평가 완료 - 클립 {len(predictions)}개, 정확도 {accuracy:.4f}")
    return EvalReport(
        num_classes=num_classes,
        predictions=predictions,
        accuracy=accuracy,
        per_class_accuracy=per_class,
        confusion=matrix.astype(int).tolist(),
    )


def split_segments(segments: Sequence[LogGtSegment], test_fold: int) -> Tuple[List[LogGtSegment], List[LogGtSegment]]:
    """
    테스트 = 해당 폴드의 원본 세그먼트, 학습 = 다른 폴드의 전체 세그먼트(원본 + 증강).
    """
    train = [s for s in segments if s.fold != test_fold]
    test = [s for s in segments if s.fold == test_fold and s.is_original]
    return train, test


@log_execution(module_name="train_eval", step_name="cross_validate")
def cross_validate(
    segments: Sequence[LogGtSegment],
    model_cfg: AcrnnConfig,
    train_cfg: TrainConfig,
    feature_cfg: Optional[FeatureConfig] = None,
    class_names: Optional[List[str]] = None,
    folds: Optional[Sequence[int]] = None,
) -> CrossValidationReport:
    """
    공식 폴드 설정으로 k-fold 교차 검증을 수행합니다.

    폴드마다 학습 세그먼트만으로 정규화 통계를 계산하고, 학습 후 테스트 폴드를 평가합니다.

    Args:
        segments (Sequence[LogGtSegment]): 특징 저장소의 전체 세그먼트.
        model_cfg (AcrnnConfig): 모델 설정.
        train_cfg (TrainConfig): 학습 설정.
        feature_cfg (Optional[FeatureConfig]): 체크포인트 기록용 특징 설정.
        class_names (Optional[List[str]]): 클래스 이름.
        folds (Optional[Sequence[int]]): 평가할 폴드 (기본값: 모든 폴드).

    Returns:
        CrossValidationReport: 폴드별 결과와 평균 정확도.

    Raises:
        ArgumentError: 세그먼트가 없거나 폴드가 2개 미만인 경우.
    """
    if not segments:
        raise ArgumentError("교차 검증할 세그먼트가 없습니다")
    available = sorted({s.fold for s in segments})
    if len(available) < 2:
        raise ArgumentError(f"교차 검증에는 폴드가 2개 이상 필요합니다: {available}")
    folds = list(folds or available)

    results: List[FoldResult] = []
    for step, fold in enumerate(folds, start=1):
        logger.info(f"Fold {step}/{len(folds)}: 테스트 폴드 {fold} ({model_cfg.setting_label})")
        train, test = split_segments(segments, fold)
        if not train or not test:
            raise ArgumentError(f"폴드 {fold}의 학습/테스트 세그먼트가 비어 있습니다")
        stats = fit_norm(train)
        trained = train_fold(train, train_cfg, model_cfg, stats, feature_cfg, class_names, fold=fold)
        report = evaluate(trained.model, test, stats, model_cfg.num_classes, fold=fold)
        results.append(
            FoldResult(fold=fold, norm_stats=stats, report=report, history=trained.history, train_segments=len(train))
        )

    mean_accuracy = float(np.mean([r.report.accuracy for r in results]))
    logger.info(f"교차 검증 완료 - 평균 정확도 {mean_accuracy:.4f}")
    return CrossValidationReport(setting=model_cfg.setting_label, folds=results, mean_accuracy=mean_accuracy)


def write_report_json(path: PathLike, report) -> Path:
    """pydantic 보고서를 정렬된 JSON으로 저장 (타임스탬프 없음)"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = report.model_dump(mode="json")
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
    return path


def write_confusion_csv(path: PathLike, report: EvalReport, class_names: Optional[List[str]] = None) -> Path:
    """confusion 행렬 CSV (첫 행/열은 클래스 이름)"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(class_names or [str(c) for c in range(report.num_classes)])
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["true\\pred", *names])
        for name, row in zip(names, report.confusion):
            writer.writerow([name, *row])
    return path
