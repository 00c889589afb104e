"""
Log-GTs 특징 추출 모듈
- Hamming STFT 파워 스펙트로그램 (librosa)
- ERB 간격 128밴드 감마톤 필터뱅크 (FFT 빈 가중치)
- 로그 압축 → 델타 → 128프레임/50% 중첩 세그먼트
- 학습 세트 채널별 정규화
"""

import logging
from typing import List, Optional, Sequence

import librosa
import numpy as np

from ..shared.errors import ArgumentError, EmptyInputError, FeatureExtractionError, ShapeError
from ..shared.schemas import AudioClip, ClipMeta
from .schemas import (
    FeatureConfig,
    GammatoneBank,
    LogGtSegment,
    NormStats,
    Spectrogram,
    StftConfig,
)

logger = logging.getLogger(__name__)

# Glasberg–Moore ERB 파라미터
ERB_MIN_BW = 24.7
ERB_Q_SCALE = 4.37 / 1000.0
GAMMATONE_ORDER = 4
GAMMATONE_BW_FACTOR = 1.019


def stft_power(clip: AudioClip, cfg: StftConfig = None) -> np.ndarray:
    """
    Hamming 윈도우 STFT의 파워(|X|²)를 계산합니다.

    프레임 t는 [t·hop, t·hop + window_len) 구간을 덮으며 중앙 패딩을 하지 않습니다.

    Args:
        clip (AudioClip): 입력 클립.
        cfg (Optional[StftConfig]): STFT 설정.

    Returns:
        np.ndarray: num_frames × (window_len/2 + 1) 파워 행렬.

    Raises:
        EmptyInputError: 클립이 윈도우 하나보다 짧은 경우.
    """
    cfg = cfg or StftConfig()
    if clip.samples.size < cfg.window_len:
        raise EmptyInputError(
            f"클립 길이({clip.samples.size})가 STFT 윈도우({cfg.window_len})보다 짧습니다"
        )
    spectrum = librosa.stft(
        clip.samples,
        n_fft=cfg.window_len,
        hop_length=cfg.hop,
        win_length=cfg.window_len,
        window=cfg.window,
        center=False,
    )
    return (np.abs(spectrum) ** 2).T


def erb_rate(freq_hz):
    """주파수(Hz) → ERB-rate 척도"""
    return 21.4 * np.log10(1.0 + ERB_Q_SCALE * np.asarray(freq_hz, dtype=np.float64))


def erb_rate_to_hz(rate):
    """ERB-rate 척도 → 주파수(Hz)"""
    return (10.0 ** (np.asarray(rate, dtype=np.float64) / 21.4) - 1.0) / ERB_Q_SCALE


def make_gammatone_bank(num_bands: int, num_bins: int, sample_rate_hz: int, f_min_hz: float = 20.0) -> GammatoneBank:
    """
    ERB 간격 중심 주파수를 가진 4차 감마톤 필터뱅크를 FFT 빈 가중치로 생성합니다.

    각 행은 중심 주파수 fc, 대역폭 b = 1.019·ERB(fc)인 감마톤 전달함수의
    제곱 크기 (1 + ((f − fc)/b)²)^(−4)를 빈 주파수에서 샘플링한 뒤 최대값 1로 정규화합니다.
    중심 주파수는 ERB-rate 척도에서 [f_min, nyquist]를 num_bands개로 등분한 칸의 중점이므로
    최저 중심은 f_min보다 반 칸 위, 최고 중심은 nyquist보다 반 칸 아래에 놓입니다.

    Args:
        num_bands (int): 밴드 수 (≥ 2).
        num_bins (int): FFT 단측 빈 수 (window_len/2 + 1).
        sample_rate_hz (int): 샘플링 레이트.
        f_min_hz (float): 중심 주파수 범위 하한.

    Returns:
        GammatoneBank: num_bands × num_bins 가중치와 오름차순 중심 주파수.

    Raises:
        ArgumentError: 범위가 잘못된 경우.
    """
    nyquist = sample_rate_hz / 2.0
    if num_bands < 2:
        raise ArgumentError(f"num_bands는 2 이상이어야 합니다: {num_bands}")
    if num_bins < 2:
        raise ArgumentError(f"num_bins는 2 이상이어야 합니다: {num_bins}")
    if not 0.0 < f_min_hz < nyquist:
        raise ArgumentError(f"f_min_hz는 (0, {nyquist}) 범위여야 합니다: {f_min_hz}")

    # ERB-rate 등분 칸의 중점
    edges = np.linspace(erb_rate(f_min_hz), erb_rate(nyquist), num_bands + 1)
    rates = 0.5 * (edges[:-1] + edges[1:])
    centers = erb_rate_to_hz(rates)

    n_fft = 2 * (num_bins - 1)
    bin_freqs = np.arange(num_bins) * sample_rate_hz / n_fft
    bandwidth = GAMMATONE_BW_FACTOR * ERB_MIN_BW * (ERB_Q_SCALE * centers + 1.0)

    detune = (bin_freqs[None, :] - centers[:, None]) / bandwidth[:, None]
    response = (1.0 + detune ** 2) ** (-GAMMATONE_ORDER)
    weights = response / response.max(axis=1, keepdims=True)

    return GammatoneBank(
        num_bands=num_bands,
        weights=weights,
        center_freqs_hz=centers,
        sample_rate_hz=sample_rate_hz,
    )


def apply_bank(power: np.ndarray, bank: GammatoneBank, hop: int = 512) -> Spectrogram:
    """
    파워 스펙트로그램에 감마톤 가중치를 적용합니다: out[t,b] = Σ_k W[b,k]·P[t,k].

    Args:
        power (np.ndarray): num_frames × num_bins 파워 행렬.
        bank (GammatoneBank): 필터뱅크.
        hop (int): 프레임 레이트 계산용 홉 길이.

    Returns:
        Spectrogram: 에너지 영역 밴드 스펙트로그램.

    Raises:
        ShapeError: 빈 수가 맞지 않는 경우.
    """
    power = np.asarray(power, dtype=np.float64)
    if power.ndim != 2 or power.shape[1] != bank.num_bins:
        raise ShapeError(f"파워 행렬의 빈 수({power.shape})가 필터뱅크({bank.num_bins})와 다릅니다")
    return Spectrogram(
        values=power @ bank.weights.T,
        frame_rate_hz=bank.sample_rate_hz / hop,
        log_domain=False,
    )


def log_compress(spec: Spectrogram, eps: float = 1e-10) -> Spectrogram:
    """
    에너지 스펙트로그램을 자연로그 척도로 변환합니다: ln(x + eps).

    Args:
        spec (Spectrogram): 에너지 영역 스펙트로그램.
        eps (float): 0 보호용 epsilon.

    Returns:
        Spectrogram: 로그 영역 스펙트로그램.
    """
    if spec.log_domain:
        raise ArgumentError("이미 로그 영역인 스펙트로그램입니다")
    return Spectrogram(values=np.log(spec.values + eps), frame_rate_hz=spec.frame_rate_hz, log_domain=True)


def compute_delta(spec: Spectrogram, half_window: int = 2) -> Spectrogram:
    """
    회귀식 델타를 계산합니다: d[t] = Σ n·(x[t+n] − x[t−n]) / (2·Σ n²).

    가장자리 프레임은 복제 패딩하므로 시간 불변 입력의 델타는 정확히 0입니다.

    Args:
        spec (Spectrogram): 입력 스펙트로그램.
        half_window (int): 회귀 반창 N (≥ 1).

    Returns:
        Spectrogram: 같은 형태의 델타 스펙트로그램.
    """
    if half_window < 1:
        raise ArgumentError(f"half_window는 1 이상이어야 합니다: {half_window}")
    x = spec.values
    num_frames = x.shape[0]
    padded = np.pad(x, ((half_window, half_window), (0, 0)), mode="edge")
    numerator = np.zeros_like(x)
    for n in range(1, half_window + 1):
        ahead = padded[half_window + n: half_window + n + num_frames]
        behind = padded[half_window - n: half_window - n + num_frames]
        numerator += n * (ahead - behind)
    denominator = 2.0 * sum(n * n for n in range(1, half_window + 1))
    return Spectrogram(values=numerator / denominator, frame_rate_hz=spec.frame_rate_hz, log_domain=spec.log_domain)


def segment(
    spec_static: Spectrogram,
    spec_delta: Spectrogram,
    frames_per_segment: int = 128,
    overlap: float = 0.5,
    clip: Optional[ClipMeta] = None,
    provenance: str = "original",
) -> List[LogGtSegment]:
    """
    static/delta 스펙트로그램을 중첩 세그먼트로 자르고 채널 축으로 쌓습니다.

    세그먼트는 hop = frames_per_segment·(1 − overlap)의 배수에서 시작하며,
    마지막 불완전 구간은 버립니다.

    Args:
        spec_static (Spectrogram): 로그 스펙트로그램 (채널 0).
        spec_delta (Spectrogram): 델타 스펙트로그램 (채널 1).
        frames_per_segment (int): 세그먼트 길이 (프레임).
        overlap (float): 중첩 비율 [0, 1).
        clip (Optional[ClipMeta]): 원본 클립 메타데이터.
        provenance (str): 증강 출처 태그.

    Returns:
        List[LogGtSegment]: 세그먼트 리스트.

    Raises:
        ShapeError: 두 입력의 형태가 다른 경우.
        EmptyInputError: 세그먼트 하나보다 짧은 경우.
    """
    static, delta = spec_static.values, spec_delta.values
    if static.shape != delta.shape:
        raise ShapeError(f"static{static.shape}과 delta{delta.shape}의 형태가 다릅니다")
    if not 0.0 <= overlap < 1.0:
        raise ArgumentError(f"overlap은 [0, 1) 범위여야 합니다: {overlap}")
    num_frames = static.shape[0]
    if num_frames < frames_per_segment:
        raise EmptyInputError(f"프레임 수({num_frames})가 세그먼트 길이({frames_per_segment})보다 짧습니다")

    hop = max(1, int(round(frames_per_segment * (1.0 - overlap))))
    segments = []
    for index, start in enumerate(range(0, num_frames - frames_per_segment + 1, hop)):
        stop = start + frames_per_segment
        data = np.stack([static[start:stop], delta[start:stop]], axis=-1)
        segments.append(LogGtSegment(data=data, clip=clip, segment_index=index, provenance=provenance))
    return segments


def fit_norm(segments: Sequence[LogGtSegment]) -> NormStats:
    """
    학습 세그먼트 전체에 대한 채널별 전역 평균과 모표준편차를 계산합니다.

    Args:
        segments (Sequence[LogGtSegment]): 학습 세그먼트.

    Returns:
        NormStats: 채널별 통계 (std 하한 1e-8).

    Raises:
        ArgumentError: 빈 리스트인 경우.
    """
    if not segments:
        raise ArgumentError("정규화 통계를 계산할 세그먼트가 없습니다")

    count = sum(s.data.shape[0] * s.data.shape[1] for s in segments)
    total = np.zeros(2)
    for s in segments:
        total += s.data.sum(axis=(0, 1), dtype=np.float64)
    mean = total / count

    squared = np.zeros(2)
    for s in segments:
        squared += ((s.data.astype(np.float64) - mean) ** 2).sum(axis=(0, 1))
    std = np.sqrt(squared / count)

    return NormStats(mean=mean.tolist(), std=std.tolist())


def apply_norm(segment: LogGtSegment, stats: NormStats) -> LogGtSegment:
    """
    채널별 (x − mean) / std 정규화를 적용한 새 세그먼트를 반환합니다.

    Args:
        segment (LogGtSegment): 입력 세그먼트.
        stats (NormStats): 학습 세트 통계.

    Returns:
        LogGtSegment: 정규화된 세그먼트.
    """
    mean = np.asarray(stats.mean, dtype=np.float64)
    std = np.asarray(stats.std, dtype=np.float64)
    data = (segment.data.astype(np.float64) - mean) / std
    return segment.model_copy(update={"data": data})


def extract_features(
    clip: AudioClip,
    bank: GammatoneBank,
    cfg: StftConfig = None,
    *,
    frames_per_segment: int = 128,
    overlap: float = 0.5,
    log_eps: float = 1e-10,
    half_window: int = 2,
    meta: Optional[ClipMeta] = None,
    provenance: str = "original",
) -> List[LogGtSegment]:
    """
    STFT → 감마톤 → 로그 → 델타 → 세그먼트 순서로 Log-GTs를 추출합니다.

    델타는 세그먼트 분할 전에 클립 전체 로그 스펙트로그램에서 계산합니다.

    Args:
        clip (AudioClip): 입력 클립.
        bank (GammatoneBank): 감마톤 필터뱅크.
        cfg (Optional[StftConfig]): STFT 설정.
        frames_per_segment (int): 세그먼트 길이.
        overlap (float): 세그먼트 중첩 비율.
        log_eps (float): 로그 epsilon.
        half_window (int): 델타 회귀 반창.
        meta (Optional[ClipMeta]): 클립 메타데이터.
        provenance (str): 증강 출처 태그.

    Returns:
        List[LogGtSegment]: frames_per_segment × num_bands × 2 세그먼트 리스트.
    """
    cfg = cfg or StftConfig()
    if clip.sample_rate_hz != bank.sample_rate_hz:
        raise ArgumentError(
            f"클립 샘플링 레이트({clip.sample_rate_hz})가 필터뱅크({bank.sample_rate_hz})와 다릅니다"
        )
    power = stft_power(clip, cfg)
    static = log_compress(apply_bank(power, bank, hop=cfg.hop), eps=log_eps)
    delta = compute_delta(static, half_window=half_window)
    return segment(static, delta, frames_per_segment, overlap, clip=meta, provenance=provenance)


class FeatureExtractor:
    """
    FeatureConfig와 불변 감마톤 필터뱅크를 보유하고 클립 단위 추출을 수행하는 클래스.

    필터뱅크는 생성 후 변경되지 않으므로 여러 스레드에서 공유할 수 있습니다.
    """

    def __init__(self, cfg: FeatureConfig = None, pad_short: bool = True):
        """
        Args:
            cfg (Optional[FeatureConfig]): 특징 추출 설정.
            pad_short (bool): 세그먼트 하나보다 짧은 클립을 무음으로 패딩할지 여부.
        """
        self.cfg = cfg or FeatureConfig()
        self.pad_short = pad_short
        self.bank = make_gammatone_bank(
            self.cfg.num_bands, self.cfg.stft.num_bins, self.cfg.sample_rate_hz, self.cfg.f_min_hz
        )
        logger.info(
            f"FeatureExtractor 초기화 - {self.cfg.num_bands}밴드, "
            f"세그먼트 {self.cfg.frames_per_segment}프레임 (overlap {self.cfg.overlap})"
        )

    @property
    def min_samples(self) -> int:
        """세그먼트 하나를 만들기 위한 최소 샘플 수"""
        stft = self.cfg.stft
        return (self.cfg.frames_per_segment - 1) * stft.hop + stft.window_len

    def extract(self, clip: AudioClip, meta: Optional[ClipMeta] = None, provenance: str = "original") -> List[LogGtSegment]:
        """
        클립 하나에서 Log-GTs 세그먼트를 추출합니다.

        Args:
            clip (AudioClip): 입력 클립.
            meta (Optional[ClipMeta]): 클립 메타데이터.
            provenance (str): 증강 출처 태그.

        Returns:
            List[LogGtSegment]: 세그먼트 리스트.

        Raises:
            FeatureExtractionError: 추출 실패 시 (클립 경로 포함).
        """
        if self.pad_short and clip.samples.size < self.min_samples:
            padded = np.zeros(self.min_samples)
            padded[: clip.samples.size] = clip.samples
            clip = AudioClip(samples=padded, sample_rate_hz=clip.sample_rate_hz)
        try:
            return extract_features(
                clip,
                self.bank,
                self.cfg.stft,
                frames_per_segment=self.cfg.frames_per_segment,
                overlap=self.cfg.overlap,
                log_eps=self.cfg.log_eps,
                half_window=self.cfg.delta_half_window,
                meta=meta,
                provenance=provenance,
            )
        except Exception as e:
            name = meta.path if meta else "<memory>"
            logger.error(f"특징 추출 실패: {name}: {e}")
            raise FeatureExtractionError(name, e) from e
