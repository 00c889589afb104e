"""
WAV 디코딩, 표준 샘플링 레이트 변환, ESC 데이터셋 매니페스트 로딩 모듈
- soundfile 기반 16-bit PCM / 32-bit float WAV 디코딩
- Kaiser 윈도우 windowed-sinc 리샘플링 (scipy)
- ESC-50/ESC-10 메타 CSV → 폴드별 클립 리스트
"""

import csv
import logging
import math
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import soundfile as sf
from pydantic import ValidationError
from scipy.signal import firwin, resample_poly

from ..config import Config
from ..shared.errors import (
    ArgumentError,
    AudioFormatError,
    AudioIOError,
    EmptyInputError,
    ManifestError,
    ManifestParseError,
)
from ..shared.schemas import AudioClip, ClipMeta, DatasetManifest

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

SUPPORTED_SUBTYPES = ("PCM_16", "FLOAT")
MANIFEST_COLUMNS = ("filename", "fold", "target", "category")

# 리샘플러: 위상당 64탭, Kaiser beta 5.0
RESAMPLER_HALF_TAPS = 32
RESAMPLER_KAISER_BETA = 5.0


def resample(samples: np.ndarray, orig_rate_hz: int, target_rate_hz: int) -> np.ndarray:
    """
    Kaiser 윈도우 windowed-sinc 폴리페이즈 필터로 샘플링 레이트를 변환합니다.

    Args:
        samples (np.ndarray): 1차원 입력 신호.
        orig_rate_hz (int): 원본 샘플링 레이트.
        target_rate_hz (int): 목표 샘플링 레이트.

    Returns:
        np.ndarray: 길이 ceil(len · up / down)의 리샘플링된 신호.

    Raises:
        ArgumentError: 샘플링 레이트가 양수가 아닌 경우.
    """
    if orig_rate_hz <= 0 or target_rate_hz <= 0:
        raise ArgumentError(f"샘플링 레이트는 양수여야 합니다: {orig_rate_hz} → {target_rate_hz}")
    if orig_rate_hz == target_rate_hz:
        return np.asarray(samples, dtype=np.float64).copy()

    g = math.gcd(int(orig_rate_hz), int(target_rate_hz))
    up, down = int(target_rate_hz) // g, int(orig_rate_hz) // g
    max_rate = max(up, down)
    taps = firwin(2 * RESAMPLER_HALF_TAPS * max_rate + 1, 1.0 / max_rate,
                  window=("kaiser", RESAMPLER_KAISER_BETA))
    return resample_poly(np.asarray(samples, dtype=np.float64), up, down, window=taps)


def load_clip(path: PathLike, target_rate_hz: int = None) -> AudioClip:
    """
    WAV 파일을 읽어 모노, 목표 샘플링 레이트의 AudioClip으로 변환합니다.

    스테레오는 채널 산술 평균으로 모노 변환하며, 진폭은 [-1, 1]로 제한합니다.

    Args:
        path (PathLike): WAV 파일 경로 (16-bit PCM 또는 32-bit float).
        target_rate_hz (Optional[int]): 목표 샘플링 레이트 (기본값: Config.TARGET_SAMPLE_RATE).

    Returns:
        AudioClip: 디코딩된 모노 클립.

    Raises:
        AudioIOError: 파일이 없거나 읽을 수 없는 경우.
        AudioFormatError: 지원하지 않는 인코딩인 경우.
        EmptyInputError: 오디오 길이가 0인 경우.
    """
    path = Path(path)
    target = int(target_rate_hz or Config.TARGET_SAMPLE_RATE)
    if not path.is_file():
        raise AudioIOError(f"오디오 파일을 찾을 수 없습니다: {path}")

    try:
        info = sf.info(str(path))
    except Exception as e:
        raise AudioIOError(f"오디오 파일을 읽을 수 없습니다: {path} ({e})") from e

    if info.format != "WAV" or info.subtype not in SUPPORTED_SUBTYPES:
        raise AudioFormatError(
            f"지원하지 않는 인코딩입니다: {path} (format={info.format}, subtype={info.subtype})"
        )
    if info.frames == 0:
        raise EmptyInputError(f"오디오 길이가 0입니다: {path}")

    try:
        data, rate = sf.read(str(path), dtype="float64", always_2d=True)
    except Exception as e:
        raise AudioIOError(f"오디오 디코딩 실패: {path} ({e})") from e

    if data.shape[0] == 0:
        raise EmptyInputError(f"오디오 길이가 0입니다: {path}")

    mono = data.mean(axis=1)
    if rate != target:
        logger.debug(f"리샘플링: {path.name} {rate}Hz → {target}Hz")
        mono = resample(mono, rate, target)

    mono = np.clip(mono, -1.0, 1.0)
    return AudioClip(samples=mono, sample_rate_hz=target)


def write_clip(path: PathLike, clip: AudioClip, subtype: str = "FLOAT") -> Path:
    """
    모노 클립을 WAV 파일로 저장합니다.

    Args:
        path (PathLike): 저장 경로.
        clip (AudioClip): 저장할 클립.
        subtype (str): "PCM_16" 또는 "FLOAT".

    Returns:
        Path: 저장된 파일 경로.
    """
    if subtype not in SUPPORTED_SUBTYPES:
        raise AudioFormatError(f"지원하지 않는 저장 형식입니다: {subtype}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        sf.write(str(path), clip.samples, clip.sample_rate_hz, subtype=subtype, format="WAV")
    except Exception as e:
        raise AudioIOError(f"오디오 저장 실패: {path} ({e})") from e
    return path


def _find_manifest_csv(root: Path) -> Path:
    """루트 아래의 메타 CSV 위치 탐색 (meta/*.csv 우선)"""
    for pattern in ("meta/*.csv", "*.csv"):
        candidates = sorted(root.glob(pattern))
        if len(candidates) == 1:
            return candidates[0]
        if len(candidates) > 1:
            raise ManifestParseError(f"메타 CSV가 여러 개입니다: {[c.name for c in candidates]}")
    raise AudioIOError(f"메타 CSV를 찾을 수 없습니다: {root}")


def resolve_audio_path(root: PathLike, filename: str) -> Path:
    """
    매니페스트 파일명을 실제 오디오 경로로 변환합니다 (root/audio/ 우선).

    Args:
        root (PathLike): 데이터셋 루트.
        filename (str): CSV의 filename 값.

    Returns:
        Path: 오디오 파일 경로 (존재 여부는 확인하지 않음).
    """
    root = Path(root)
    nested = root / "audio" / filename
    return nested if nested.exists() else root / filename


def _parse_bool(value: str) -> bool:
    return str(value).strip().lower() in ("true", "1", "yes")


def load_manifest(root: PathLike, format: str = "esc_csv", subset: Optional[str] = None) -> DatasetManifest:
    """
    ESC-50 디스크 레이아웃(메타 CSV + audio/)을 DatasetManifest로 읽습니다.

    원본 target 값은 오름차순으로 0..num_classes-1에 재배치됩니다 (ESC-50 전체는 항등 변환).

    Args:
        root (PathLike): 데이터셋 루트 디렉토리.
        format (str): 매니페스트 형식 ("esc_csv"만 지원).
        subset (Optional[str]): "esc10"이면 esc10 컬럼이 참인 행만 사용.

    Returns:
        DatasetManifest: 폴드 정보를 포함한 클립 목록.

    Raises:
        AudioIOError: 루트나 CSV를 찾을 수 없는 경우.
        ManifestParseError: CSV 형식 오류 (행 번호 포함).
        ManifestError: 참조된 오디오 파일이 없는 경우.
    """
    if format != "esc_csv":
        raise ArgumentError(f"지원하지 않는 매니페스트 형식입니다: {format}")
    if subset not in (None, "esc10"):
        raise ArgumentError(f"지원하지 않는 subset입니다: {subset}")

    root = Path(root)
    if not root.is_dir():
        raise AudioIOError(f"데이터셋 루트를 찾을 수 없습니다: {root}")
    csv_path = _find_manifest_csv(root)

    rows: List[Tuple[int, str, int, int, str]] = []
    with open(csv_path, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None:
            raise ManifestParseError(f"빈 CSV 파일입니다: {csv_path}", row=1)
        missing = [c for c in MANIFEST_COLUMNS if c not in reader.fieldnames]
        if missing:
            raise ManifestParseError(f"필수 컬럼이 없습니다: {missing}", row=1)
        if subset == "esc10" and "esc10" not in reader.fieldnames:
            raise ManifestParseError("esc10 컬럼이 없습니다", row=1)

        for record in reader:
            row_number = reader.line_num
            if subset == "esc10" and not _parse_bool(record.get("esc10", "")):
                continue
            try:
                filename = (record["filename"] or "").strip()
                fold = int(record["fold"])
                target = int(record["target"])
                category = (record["category"] or "").strip()
            except (TypeError, ValueError) as e:
                raise ManifestParseError(f"잘못된 값입니다: {record} ({e})", row=row_number) from e
            if not filename or fold < 1 or target < 0:
                raise ManifestParseError(f"잘못된 행입니다: {record}", row=row_number)
            rows.append((row_number, filename, fold, target, category))

    if not rows:
        raise ManifestParseError(f"데이터 행이 없습니다: {csv_path}")

    target_to_id: Dict[int, int] = {t: i for i, t in enumerate(sorted({r[3] for r in rows}))}
    seen = set()
    clips: List[ClipMeta] = []
    for row_number, filename, fold, target, category in rows:
        if filename in seen:
            raise ManifestParseError(f"중복된 파일명입니다: {filename}", row=row_number)
        seen.add(filename)
        if not resolve_audio_path(root, filename).is_file():
            raise ManifestError(f"매니페스트가 참조하는 오디오 파일이 없습니다: {filename}")
        clips.append(ClipMeta(path=filename, fold=fold, class_id=target_to_id[target], class_name=category))

    try:
        manifest = DatasetManifest(
            root=str(root),
            clips=clips,
            num_classes=len(target_to_id),
            num_folds=max(c.fold for c in clips),
        )
    except ValidationError as e:
        raise ManifestParseError(f"매니페스트 검증 실패: {e}") from e

    logger.info(
        f"매니페스트 로드 완료: {len(clips)}개 클립, {manifest.num_classes}개 클래스, {manifest.num_folds}개 폴드"
    )
    return manifest


def split_folds(manifest: DatasetManifest, test_fold: int) -> Tuple[List[ClipMeta], List[ClipMeta]]:
    """
    공식 폴드 설정에 따라 학습/테스트 클립을 분리합니다.

    Args:
        manifest (DatasetManifest): 데이터셋 매니페스트.
        test_fold (int): 테스트로 사용할 폴드 번호 (1..num_folds).

    Returns:
        Tuple[List[ClipMeta], List[ClipMeta]]: (학습 클립, 테스트 클립).

    Raises:
        ArgumentError: 폴드 번호가 범위를 벗어난 경우.
    """
    if not 1 <= test_fold <= manifest.num_folds:
        raise ArgumentError(f"test_fold는 1..{manifest.num_folds} 범위여야 합니다: {test_fold}")
    train = [c for c in manifest.clips if c.fold != test_fold]
    test = [c for c in manifest.clips if c.fold == test_fold]
    return train, test
