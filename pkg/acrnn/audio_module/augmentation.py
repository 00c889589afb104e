"""
학습 데이터 증강 모듈
- 원시 오디오: phase vocoder time stretch, pitch shift (librosa)
- 특징 공간: 배치 단위 mixup (λ ~ Beta(α, α))
"""

import logging
from typing import List, Optional, Tuple, Union

import librosa
import numpy as np

from ..shared.errors import ArgumentError, ShapeError
from ..shared.schemas import AudioClip
from .schemas import AugmentPlan, MixupConfig

logger = logging.getLogger(__name__)

# phase vocoder STFT 설정
VOCODER_N_FFT = 2048
VOCODER_HOP = 512

STRETCH_LIMITS = (0.5, 2.0)
PITCH_LIMIT_SEMITONES = 12.0
LABEL_SUM_TOL = 1e-4


def time_stretch(clip: AudioClip, rate: float) -> AudioClip:
    """
    피치를 유지한 채 재생 속도를 rate배로 바꿉니다 (phase vocoder, 2048/512).

    Args:
        clip (AudioClip): 입력 클립.
        rate (float): 속도 배율 [0.5, 2.0]. 출력 길이 ≈ 입력 / rate.

    Returns:
        AudioClip: 늘이거나 줄인 클립.

    Raises:
        ArgumentError: rate가 범위를 벗어난 경우.
    """
    lo, hi = STRETCH_LIMITS
    if not lo <= rate <= hi:
        raise ArgumentError(f"time stretch 배율은 [{lo}, {hi}] 범위여야 합니다: {rate}")
    stretched = librosa.effects.time_stretch(
        clip.samples, rate=float(rate), n_fft=VOCODER_N_FFT, hop_length=VOCODER_HOP
    )
    return AudioClip(samples=stretched, sample_rate_hz=clip.sample_rate_hz)


def pitch_shift(clip: AudioClip, semitones: float) -> AudioClip:
    """
    길이를 유지한 채 피치를 반음 단위로 이동합니다.

    비율 2^(semitones/12)의 time stretch와 리샘플링을 결합하므로 출력 길이는 입력과 같습니다.

    Args:
        clip (AudioClip): 입력 클립.
        semitones (float): 반음 수 [-12, 12].

    Returns:
        AudioClip: 피치가 이동된 클립.

    Raises:
        ArgumentError: 범위를 벗어난 경우.
    """
    if abs(semitones) > PITCH_LIMIT_SEMITONES:
        raise ArgumentError(f"pitch shift는 ±{PITCH_LIMIT_SEMITONES} 반음 이내여야 합니다: {semitones}")
    shifted = librosa.effects.pitch_shift(
        clip.samples,
        sr=clip.sample_rate_hz,
        n_steps=float(semitones),
        n_fft=VOCODER_N_FFT,
        hop_length=VOCODER_HOP,
    )
    return AudioClip(samples=shifted, sample_rate_hz=clip.sample_rate_hz)


def _as_array(x) -> np.ndarray:
    return np.asarray(getattr(x, "data", x), dtype=np.float64)


def mixup(x_i, y_i, x_j, y_j, lam: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    두 특징-라벨 쌍의 볼록 결합을 만듭니다: x̂ = λx_i + (1−λ)x_j, ŷ = λy_i + (1−λ)y_j.

    Args:
        x_i: 첫 번째 특징 (ndarray 또는 LogGtSegment).
        y_i: 첫 번째 라벨 분포.
        x_j: 두 번째 특징.
        y_j: 두 번째 라벨 분포.
        lam (float): 혼합 비율 [0, 1].

    Returns:
        Tuple[np.ndarray, np.ndarray]: (혼합 특징, 혼합 라벨).

    Raises:
        ArgumentError: λ 범위 오류 또는 라벨 합이 1이 아닌 경우.
        ShapeError: 형태가 다른 경우.
    """
    if not 0.0 <= lam <= 1.0:
        raise ArgumentError(f"λ는 [0, 1] 범위여야 합니다: {lam}")
    xa, xb = _as_array(x_i), _as_array(x_j)
    ya, yb = np.asarray(y_i, dtype=np.float64), np.asarray(y_j, dtype=np.float64)
    if xa.shape != xb.shape:
        raise ShapeError(f"특징 형태가 다릅니다: {xa.shape} vs {xb.shape}")
    if ya.shape != yb.shape:
        raise ShapeError(f"라벨 형태가 다릅니다: {ya.shape} vs {yb.shape}")
    for y in (ya, yb):
        if abs(y.sum() - 1.0) > LABEL_SUM_TOL:
            raise ArgumentError(f"라벨 분포의 합이 1이 아닙니다: {y.sum()}")
    return lam * xa + (1.0 - lam) * xb, lam * ya + (1.0 - lam) * yb


def sample_lambda(cfg: MixupConfig, rng: np.random.Generator) -> float:
    """
    Beta(α, α) 표본을 두 Gamma(α, 1) 표본의 비 g1 / (g1 + g2)로 뽑습니다.

    Args:
        cfg (MixupConfig): mixup 설정.
        rng (np.random.Generator): 난수 생성기.

    Returns:
        float: [0, 1] 범위의 λ.
    """
    g1 = rng.gamma(cfg.alpha)
    g2 = rng.gamma(cfg.alpha)
    total = g1 + g2
    return 0.5 if total == 0.0 else float(g1 / total)


def build_mixup_batch(
    x: np.ndarray,
    y: np.ndarray,
    cfg: MixupConfig,
    rng: np.random.Generator,
    permutation: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    배치 내부 무작위 순열로 짝을 정하고, 쌍마다 λ를 하나씩 뽑아 mixup합니다.

    자기 자신과 짝지어진 행은 그대로 반환합니다.

    Args:
        x (np.ndarray): B × … 특징 배치.
        y (np.ndarray): B × C 라벨 분포.
        cfg (MixupConfig): mixup 설정.
        rng (np.random.Generator): 학습 루프의 mixup 난수 생성기.
        permutation (Optional[np.ndarray]): 강제 짝 순열 (테스트용).

    Returns:
        Tuple[np.ndarray, np.ndarray]: 같은 크기의 (혼합 특징, 혼합 라벨).
    """
    batch = x.shape[0]
    if not cfg.enabled or batch < 2:
        return x, y
    if y.shape[0] != batch:
        raise ShapeError(f"특징({batch})과 라벨({y.shape[0]})의 배치 크기가 다릅니다")

    perm = rng.permutation(batch) if permutation is None else np.asarray(permutation)
    if sorted(perm.tolist()) != list(range(batch)):
        raise ArgumentError(f"유효한 순열이 아닙니다: {perm}")

    lam = np.array([sample_lambda(cfg, rng) for _ in range(batch)])
    lam[perm == np.arange(batch)] = 1.0

    lam_x = lam.reshape((batch,) + (1,) * (x.ndim - 1)).astype(x.dtype)
    lam_y = lam.reshape(batch, 1).astype(y.dtype)
    mixed_x = lam_x * x + (1 - lam_x) * x[perm]
    mixed_y = lam_y * y + (1 - lam_y) * y[perm]
    return mixed_x, mixed_y


def clip_rng(plan: AugmentPlan, clip_index: int) -> np.random.Generator:
    """클립마다 독립적인 난수 생성기 (병렬 처리 순서와 무관하게 재현 가능)"""
    return np.random.default_rng([plan.seed, clip_index])


def augment_clip(
    clip: AudioClip, plan: AugmentPlan, rng: Union[np.random.Generator, int]
) -> List[Tuple[AudioClip, str]]:
    """
    AugmentPlan에 따라 time stretch / pitch shift 사본을 번갈아 생성합니다.

    Args:
        clip (AudioClip): 원본 클립.
        plan (AugmentPlan): 증강 계획.
        rng (Union[np.random.Generator, int]): 난수 생성기 또는 클립 인덱스.

    Returns:
        List[Tuple[AudioClip, str]]: (증강 클립, provenance 설명) 리스트.
    """
    if not isinstance(rng, np.random.Generator):
        rng = clip_rng(plan, int(rng))

    copies: List[Tuple[AudioClip, str]] = []
    for k in range(plan.copies_per_clip):
        if k % 2 == 0:
            rate = float(rng.uniform(*plan.stretch_range))
            copies.append((time_stretch(clip, rate), f"stretch:{rate:.4f}"))
        else:
            steps = float(rng.uniform(*plan.pitch_range_semitones))
            copies.append((pitch_shift(clip, steps), f"pitch:{steps:+.4f}"))
    return copies
