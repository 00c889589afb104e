"""
Log-GTs 특징 저장소 입출력

레코드 = 헤더 + 데이터. 세그먼트마다 한 레코드이며 파일은 레코드를 이어 붙인 형태입니다.

    magic "LGT1" | u16 version | u16 frames | u16 bands | u16 channels
    | str clip_path | str class_name | str provenance
    | u32 segment_index | i32 class_id | i32 fold
    | f32 LE data (time → band → channel 순)

문자열은 u16 길이 + UTF-8 바이트입니다.
"""

import logging
import struct
from pathlib import Path
from typing import Iterable, List, Union

import numpy as np

from ..shared.errors import FeatureStoreError
from ..shared.schemas import ClipMeta
from .schemas import LogGtSegment, NormStats

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

STORE_MAGIC = b"LGT1"
STORE_VERSION = 1
PARTIAL_SUFFIX = ".partial"

_DIMS = struct.Struct("<4sHHHH")
_TAIL = struct.Struct("<Iii")
_STRLEN = struct.Struct("<H")


def partial_path(path: PathLike) -> Path:
    """작성 중 저장소 경로 (<path>.partial)"""
    path = Path(path)
    return path.with_name(path.name + PARTIAL_SUFFIX)


def _pack_str(value: str) -> bytes:
    raw = value.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise FeatureStoreError(f"문자열이 너무 깁니다 ({len(raw)} bytes)")
    return _STRLEN.pack(len(raw)) + raw


def _encode_record(seg: LogGtSegment) -> bytes:
    frames, bands, channels = seg.data.shape
    clip = seg.clip
    parts = [
        _DIMS.pack(STORE_MAGIC, STORE_VERSION, frames, bands, channels),
        _pack_str(clip.path if clip else ""),
        _pack_str(clip.class_name if clip else ""),
        _pack_str(seg.provenance),
        _TAIL.pack(seg.segment_index, clip.class_id if clip else -1, clip.fold if clip else 0),
        np.ascontiguousarray(seg.data, dtype="<f4").tobytes(),
    ]
    return b"".join(parts)


def write_store(path: PathLike, segments: Iterable[LogGtSegment]) -> Path:
    """
    세그먼트를 저장소 파일로 기록합니다.

    <path>.partial에 먼저 쓰고 성공 시 최종 경로로 이름을 바꿉니다.
    중간에 실패하면 .partial 파일이 남아 미완성 상태를 표시합니다.

    Args:
        path (PathLike): 저장소 경로.
        segments (Iterable[LogGtSegment]): 기록할 세그먼트.

    Returns:
        Path: 완성된 저장소 경로.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = partial_path(path)
    count = 0
    try:
        with open(tmp, "wb") as f:
            for seg in segments:
                f.write(_encode_record(seg))
                count += 1
    except OSError as e:
        raise FeatureStoreError(f"특징 저장소 기록 실패: {tmp} ({e})") from e
    tmp.replace(path)
    logger.info(f"특징 저장소 기록 완료: {path} ({count}개 세그먼트)")
    return path


def _read_str(buf: memoryview, offset: int):
    (length,) = _STRLEN.unpack_from(buf, offset)
    offset += _STRLEN.size
    value = bytes(buf[offset: offset + length]).decode("utf-8")
    return value, offset + length


def read_store(path: PathLike) -> List[LogGtSegment]:
    """
    저장소 파일 전체를 세그먼트 리스트로 읽습니다.

    Args:
        path (PathLike): 저장소 경로.

    Returns:
        List[LogGtSegment]: 저장 순서대로의 세그먼트 (float32 데이터).

    Raises:
        FeatureStoreError: 파일이 없거나 손상된 경우.
    """
    path = Path(path)
    if not path.is_file():
        raise FeatureStoreError(f"특징 저장소를 찾을 수 없습니다: {path}")
    buf = memoryview(path.read_bytes())

    segments: List[LogGtSegment] = []
    offset = 0
    try:
        while offset < len(buf):
            magic, version, frames, bands, channels = _DIMS.unpack_from(buf, offset)
            if magic != STORE_MAGIC:
                raise FeatureStoreError(f"잘못된 레코드 매직 {magic!r} (offset={offset})")
            if version != STORE_VERSION:
                raise FeatureStoreError(f"지원하지 않는 저장소 버전: {version}")
            offset += _DIMS.size
            clip_path, offset = _read_str(buf, offset)
            class_name, offset = _read_str(buf, offset)
            provenance, offset = _read_str(buf, offset)
            segment_index, class_id, fold = _TAIL.unpack_from(buf, offset)
            offset += _TAIL.size

            count = frames * bands * channels
            nbytes = count * 4
            if offset + nbytes > len(buf):
                raise FeatureStoreError(f"레코드 데이터가 잘렸습니다 (offset={offset})")
            data = np.frombuffer(buf[offset: offset + nbytes], dtype="<f4").reshape(frames, bands, channels)
            offset += nbytes

            clip = None
            if clip_path:
                clip = ClipMeta(path=clip_path, fold=fold, class_id=class_id, class_name=class_name)
            segments.append(
                LogGtSegment(
                    data=data.astype(np.float32),
                    clip=clip,
                    segment_index=segment_index,
                    provenance=provenance,
                )
            )
    except struct.error as e:
        raise FeatureStoreError(f"특징 저장소가 손상되었습니다: {path} ({e})") from e

    logger.info(f"특징 저장소 로드: {path} ({len(segments)}개 세그먼트)")
    return segments


def store_is_complete(path: PathLike) -> bool:
    """저장소가 존재하고 작성 중 표시(.partial)가 없으면 True"""
    path = Path(path)
    return path.is_file() and not partial_path(path).exists()


def save_norm_stats(path: PathLike, stats: NormStats) -> Path:
    """NormStats를 "mean0 mean1 std0 std1" 한 줄 텍스트로 저장합니다."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    values = [*stats.mean, *stats.std]
    path.write_text(" ".join(repr(float(v)) for v in values) + "\n", encoding="utf-8")
    return path


def load_norm_stats(path: PathLike) -> NormStats:
    """
    4개 값 텍스트 파일에서 NormStats를 읽습니다.

    Raises:
        FeatureStoreError: 파일이 없거나 값이 4개가 아닌 경우.
    """
    path = Path(path)
    try:
        tokens = path.read_text(encoding="utf-8").split()
        values = [float(t) for t in tokens]
    except (OSError, ValueError) as e:
        raise FeatureStoreError(f"정규화 통계를 읽을 수 없습니다: {path} ({e})") from e
    if len(values) != 4:
        raise FeatureStoreError(f"정규화 통계는 4개 값이어야 합니다: {path} ({len(values)}개)")
    return NormStats(mean=values[:2], std=values[2:])
