"""
체크포인트 직렬화

    magic "ACRN" | u16 version
    | u32 길이 + JSON 블롭 (모델 설정, 특징 설정, 클래스 이름)
    | f64 × 4 정규화 통계 (mean0 mean1 std0 std1)
    | u32 epoch | u32 텐서 수
    | 텐서마다: u16 이름 길이 + UTF-8 이름 | u8 rank | u32 × rank dims | f32 LE 데이터
"""

import json
import logging
import struct
from collections import OrderedDict
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
from pydantic import ValidationError

from ..feature_module.schemas import FeatureConfig, NormStats
from ..model_module.acrnn import AcrnnModel
from ..shared.errors import FeatureStoreError
from .schemas import Checkpoint, CheckpointMeta

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

CHECKPOINT_MAGIC = b"ACRN"
CHECKPOINT_VERSION = 1


def checkpoint_from_model(
    model: AcrnnModel,
    norm_stats: NormStats,
    epoch: int,
    feature_cfg: Optional[FeatureConfig] = None,
    class_names: Optional[List[str]] = None,
) -> Checkpoint:
    """모델의 현재 상태를 복사해 Checkpoint를 만듭니다."""
    tensors = OrderedDict((name, np.array(array, copy=True)) for name, array in model.state_dict().items())
    return Checkpoint(
        meta=CheckpointMeta(model=model.cfg, features=feature_cfg, class_names=list(class_names or [])),
        norm_stats=norm_stats,
        epoch=epoch,
        tensors=tensors,
    )


def model_from_checkpoint(checkpoint: Checkpoint) -> AcrnnModel:
    """체크포인트 설정으로 모델을 만들고 텐서를 불러옵니다."""
    model = AcrnnModel(checkpoint.model_cfg)
    model.load_state_dict(checkpoint.tensors)
    return model


def encode_checkpoint(checkpoint: Checkpoint) -> bytes:
    """체크포인트를 바이트열로 인코딩합니다 (타임스탬프 없음, 같은 상태는 같은 바이트)."""
    blob = json.dumps(checkpoint.meta.model_dump(mode="json"), sort_keys=True, ensure_ascii=False).encode("utf-8")
    stats = checkpoint.norm_stats
    parts = [
        CHECKPOINT_MAGIC,
        struct.pack("<H", CHECKPOINT_VERSION),
        struct.pack("<I", len(blob)),
        blob,
        struct.pack("<4d", *stats.mean, *stats.std),
        struct.pack("<II", checkpoint.epoch, len(checkpoint.tensors)),
    ]
    for name, array in checkpoint.tensors.items():
        raw_name = name.encode("utf-8")
        array = np.asarray(array)
        parts.append(struct.pack("<H", len(raw_name)) + raw_name)
        parts.append(struct.pack("<B", array.ndim) + struct.pack(f"<{array.ndim}I", *array.shape))
        parts.append(np.ascontiguousarray(array, dtype="<f4").tobytes())
    return b"".join(parts)


def save_checkpoint(path: PathLike, checkpoint: Checkpoint) -> Path:
    """
    체크포인트를 파일로 저장합니다 (임시 파일 기록 후 교체).

    float64 모델의 텐서는 32-bit로 변환되어 저장됩니다.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    try:
        tmp.write_bytes(encode_checkpoint(checkpoint))
        tmp.replace(path)
    except OSError as e:
        raise FeatureStoreError(f"체크포인트 저장 실패: {path} ({e})") from e
    logger.info(f"체크포인트 저장: {path} (epoch={checkpoint.epoch}, 텐서 {len(checkpoint.tensors)}개)")
    return path


def load_checkpoint(path: PathLike) -> Checkpoint:
    """
    체크포인트 파일을 읽습니다.

    텐서는 모델 설정의 dtype으로 복원됩니다.

    Raises:
        FeatureStoreError: 파일이 없거나 형식이 맞지 않는 경우.
    """
    path = Path(path)
    if not path.is_file():
        raise FeatureStoreError(f"체크포인트를 찾을 수 없습니다: {path}")
    buf = path.read_bytes()

    try:
        if buf[:4] != CHECKPOINT_MAGIC:
            raise FeatureStoreError(f"체크포인트 매직이 아닙니다: {buf[:4]!r}")
        offset = 4
        (version,) = struct.unpack_from("<H", buf, offset)
        if version != CHECKPOINT_VERSION:
            raise FeatureStoreError(f"지원하지 않는 체크포인트 버전: {version}")
        offset += 2
        (blob_len,) = struct.unpack_from("<I", buf, offset)
        offset += 4
        meta = CheckpointMeta.model_validate(json.loads(buf[offset: offset + blob_len].decode("utf-8")))
        offset += blob_len
        stats = struct.unpack_from("<4d", buf, offset)
        offset += 32
        epoch, count = struct.unpack_from("<II", buf, offset)
        offset += 8

        dtype = meta.model.numpy_dtype
        tensors = OrderedDict()
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", buf, offset)
            offset += 2
            name = buf[offset: offset + name_len].decode("utf-8")
            offset += name_len
            (rank,) = struct.unpack_from("<B", buf, offset)
            offset += 1
            shape = struct.unpack_from(f"<{rank}I", buf, offset)
            offset += 4 * rank
            size = int(np.prod(shape)) if rank else 1
            if offset + 4 * size > len(buf):
                raise FeatureStoreError(f"텐서 데이터가 잘렸습니다: {name}")
            data = np.frombuffer(buf, dtype="<f4", count=size, offset=offset).reshape(shape)
            tensors[name] = data.astype(dtype)
            offset += 4 * size
    except (struct.error, UnicodeDecodeError, json.JSONDecodeError, ValidationError) as e:
        raise FeatureStoreError(f"체크포인트가 손상되었습니다: {path} ({e})") from e

    return Checkpoint(
        meta=meta,
        norm_stats=NormStats(mean=list(stats[:2]), std=list(stats[2:])),
        epoch=epoch,
        tensors=tensors,
    )
