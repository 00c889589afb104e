"""
학습 루프
- 가우시안 가중치 초기화, 구간별 학습률 스케줄
- 에폭마다 무작위 순열 배치 → mixup → 순전파 → 교차 엔트로피 → Nesterov 스텝
"""

import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from ..audio_module.augmentation import build_mixup_batch
from ..feature_module.extractor import apply_norm, fit_norm
from ..feature_module.schemas import FeatureConfig, LogGtSegment, NormStats
from ..model_module.acrnn import AcrnnModel
from ..model_module.autodiff import Graph
from ..model_module.layers import cross_entropy
from ..model_module.optimizer import OptimizerState, sgd_nesterov_step
from ..model_module.schemas import AcrnnConfig
from ..shared.errors import ArgumentError, NumericError, TrainingError
from ..shared.logger_utils import log_execution
from .checkpoint import checkpoint_from_model
from .schemas import Checkpoint, EpochRecord, TrainConfig, TrainHistory

logger = logging.getLogger(__name__)

STREAM_NAMES = ("init", "shuffle", "dropout", "mixup")


def make_streams(seed: int, model_seed: Optional[int] = None) -> Dict[str, np.random.Generator]:
    """
    학습 시드 하나에서 초기화/셔플/dropout/mixup용 독립 난수 생성기를 만듭니다.

    model_seed가 주어지면 초기화 스트림만 그 시드에서 파생되어, 학습 시드를 바꿔도
    같은 초기 가중치에서 출발합니다.
    """
    children = np.random.SeedSequence(seed).spawn(len(STREAM_NAMES))
    streams = {name: np.random.default_rng(child) for name, child in zip(STREAM_NAMES, children)}
    if model_seed is not None:
        streams["init"] = np.random.default_rng(np.random.SeedSequence(model_seed).spawn(1)[0])
    return streams


def init_weights(model: AcrnnModel, std: float, rng: np.random.Generator) -> AcrnnModel:
    """
    weight ~ N(0, std²), bias / beta = 0, gamma = 1 로 초기화합니다.

    Args:
        model (AcrnnModel): 대상 모델.
        std (float): 표준편차 (> 0).
        rng (np.random.Generator): 초기화 난수 생성기.

    Returns:
        AcrnnModel: 같은 모델 (제자리 초기화).
    """
    if std <= 0:
        raise ArgumentError(f"초기화 표준편차는 양수여야 합니다: {std}")
    for param in model.parameters():
        if param.role == "weight":
            param.value = rng.normal(0.0, std, size=param.shape)
        elif param.role == "gamma":
            param.value = np.ones(param.shape)
        else:
            param.value = np.zeros(param.shape)
    return model


def build_model(model_cfg: AcrnnConfig, init_std: float, rng: np.random.Generator) -> AcrnnModel:
    """모델 생성 + init_weights"""
    return init_weights(AcrnnModel(model_cfg), init_std, rng)


def lr_at(epoch: int, cfg: TrainConfig) -> float:
    """
    구간별 상수 학습률: lr_initial / factor^(epoch // every).

    Raises:
        ArgumentError: 0 ≤ epoch < epochs 범위 밖인 경우.
    """
    if not 0 <= epoch < cfg.epochs:
        raise ArgumentError(f"epoch는 0..{cfg.epochs - 1} 범위여야 합니다: {epoch}")
    return cfg.lr_initial / (cfg.lr_decay_factor ** (epoch // cfg.lr_decay_every))


def one_hot(labels: Sequence[int], num_classes: int, dtype=np.float32) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise ArgumentError(f"라벨이 0..{num_classes - 1} 범위를 벗어났습니다")
    out = np.zeros((labels.size, num_classes), dtype=dtype)
    out[np.arange(labels.size), labels] = 1
    return out


def segments_to_arrays(
    segments: Sequence[LogGtSegment], num_classes: int, norm_stats: Optional[NormStats] = None, dtype=np.float32
) -> Tuple[np.ndarray, np.ndarray]:
    """세그먼트 리스트 → (N × T × F × 2 특징, N × C one-hot 라벨)"""
    if norm_stats is not None:
        segments = [apply_norm(s, norm_stats) for s in segments]
    x = np.stack([s.data for s in segments]).astype(dtype)
    y = one_hot([s.class_id for s in segments], num_classes, dtype)
    return x, y


class TrainResult(BaseModel):
    """train_fold 결과: 최종 체크포인트 + 학습 기록 + 학습된 모델"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    checkpoint: Checkpoint
    history: TrainHistory
    model: AcrnnModel

    def summary(self) -> dict:
        return {"checkpoint": self.checkpoint.summary(), "history": self.history.summary()}


@log_execution(module_name="train_eval", step_name="train_fold")
def train_fold(
    segments: Sequence[LogGtSegment],
    train_cfg: TrainConfig,
    model_cfg: AcrnnConfig,
    norm_stats: Optional[NormStats] = None,
    feature_cfg: Optional[FeatureConfig] = None,
    class_names: Optional[List[str]] = None,
    fold: Optional[int] = None,
) -> TrainResult:
    """
    한 폴드의 학습 세그먼트로 모델을 학습합니다.

    Args:
        segments (Sequence[LogGtSegment]): 학습 세그먼트 (원본 + 증강).
        train_cfg (TrainConfig): 학습 설정.
        model_cfg (AcrnnConfig): 모델 설정.
        norm_stats (Optional[NormStats]): 정규화 통계 (없으면 학습 세그먼트로 계산).
        feature_cfg (Optional[FeatureConfig]): 체크포인트에 기록할 특징 설정.
        class_names (Optional[List[str]]): 체크포인트에 기록할 클래스 이름.
        fold (Optional[int]): 테스트 폴드 번호 (로그 식별용).

    Returns:
        TrainResult: 최종 체크포인트와 에폭별 손실 기록.

    Raises:
        ArgumentError: 세그먼트가 없는 경우.
        TrainingError: 손실이나 활성값이 NaN/Inf가 된 경우.
    """
    if not segments:
        raise ArgumentError("학습 세그먼트가 없습니다")
    norm_stats = norm_stats or fit_norm(segments)
    dtype = model_cfg.numpy_dtype
    x_all, y_all = segments_to_arrays(segments, model_cfg.num_classes, norm_stats, dtype)

    streams = make_streams(train_cfg.seed, model_cfg.seed)
    model = build_model(model_cfg, train_cfg.init_std, streams["init"])
    params = model.parameters()
    state = OptimizerState(params, lr=train_cfg.lr_initial, momentum=train_cfg.momentum)
    history = TrainHistory()

    count = x_all.shape[0]
    logger.info(
        f"학습 시작 - 세그먼트 {count}개, {train_cfg.epochs} 에폭, 배치 {train_cfg.batch_size}, "
        f"설정 {model_cfg.setting_label}"
    )

    for epoch in range(train_cfg.epochs):
        state.lr = lr_at(epoch, train_cfg)
        order = streams["shuffle"].permutation(count)
        losses: List[float] = []
        correct = 0

        for batch_index, start in enumerate(range(0, count, train_cfg.batch_size)):
            idx = order[start: start + train_cfg.batch_size]
            xb, yb = build_mixup_batch(x_all[idx], y_all[idx], train_cfg.mixup, streams["mixup"])

            model.zero_grad()
            try:
                with Graph() as graph:
                    logits = model(xb, training=True, rng=streams["dropout"])
                    loss = cross_entropy(logits, yb)
                graph.backward(loss)
            except NumericError as e:
                logger.error(f"학습 발산: epoch={epoch}, batch={batch_index}: {e}")
                raise TrainingError(epoch, batch_index, str(e)) from e

            sgd_nesterov_step(params, state, train_cfg.l2)
            losses.append(float(loss.data))
            correct += int((logits.data.argmax(axis=1) == y_all[idx].argmax(axis=1)).sum())

        record = EpochRecord(
            epoch=epoch,
            lr=state.lr,
            mean_loss=float(np.mean(losses)),
            train_accuracy=correct / count,
            batches=len(losses),
            batch_losses=losses if train_cfg.record_batch_losses else None,
        )
        history.epochs.append(record)
        logger.debug(f"epoch {epoch}: loss={record.mean_loss:.4f}, acc={record.train_accuracy:.3f}, lr={record.lr:g}")

    logger.info(f"학습 완료 - 최종 손실 {history.losses[-1]:.4f}")
    checkpoint = checkpoint_from_model(model, norm_stats, train_cfg.epochs, feature_cfg, class_names)
    return TrainResult(checkpoint=checkpoint, history=history, model=model)
