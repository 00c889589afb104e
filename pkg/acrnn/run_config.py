"""
실험 설정 파일 (INI) 로더

    [paths]    dataset_root, feature_store, checkpoint, report_dir, subset
    [features] FeatureConfig 필드 + STFT 필드(window_len, hop, window)
    [model]    AcrnnConfig 필드
    [train]    TrainConfig 필드
    [mixup]    MixupConfig 필드
    [augment]  AugmentPlan 필드

쉼표가 들어간 값은 리스트로 해석합니다 (예: conv_filters = 32, 64, 128, 256).
우선순위: 명령행 플래그 > --set 덮어쓰기 > 설정 파일 > 기본값.
"""

import configparser
import logging
import re
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Type, Union

from pydantic import BaseModel, Field, ValidationError

from .audio_module.schemas import AugmentPlan, MixupConfig
from .config import Config
from .feature_module.schemas import FeatureConfig, StftConfig
from .model_module.schemas import AcrnnConfig
from .shared.errors import AudioIOError, ConfigError
from .train_module.schemas import TrainConfig

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

SECTIONS = ("paths", "features", "model", "train", "mixup", "augment")

_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_RE = re.compile(r"^\s*([^\s=:#;\[][^=:]*?)\s*[=:]")


class PathsConfig(BaseModel):
    """입출력 경로 (기본값은 환경 변수 Config)."""
    dataset_root: str = Field(default_factory=lambda: Config.DATASET_ROOT, description="데이터셋 루트")
    feature_store: str = Field(default_factory=lambda: Config.FEATURE_STORE, description="특징 저장소 파일")
    checkpoint: str = Field(default_factory=lambda: Config.CHECKPOINT_PATH, description="체크포인트 파일")
    report_dir: str = Field(default_factory=lambda: Config.REPORT_DIR, description="보고서 디렉토리")
    subset: Optional[str] = Field(None, description="'esc10' 부분집합")


class RunConfig(BaseModel):
    """한 번의 실행에 필요한 모든 설정."""
    paths: PathsConfig = Field(default_factory=PathsConfig)
    features: FeatureConfig = Field(default_factory=FeatureConfig)
    model: AcrnnConfig = Field(default_factory=AcrnnConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    augment: AugmentPlan = Field(default_factory=AugmentPlan)

    def summary(self) -> dict:
        return {
            "setting": self.model.setting_label,
            "epochs": self.train.epochs,
            "seed": self.train.seed,
            "store": self.paths.feature_store,
        }


# (섹션, 키) → 값 문자열, 줄 번호
RawValues = Dict[str, Dict[str, Tuple[str, Optional[int]]]]


def _scan_lines(text: str) -> Tuple[Dict[Tuple[str, str], int], Dict[str, int]]:
    """configparser가 보존하지 않는 키/섹션 줄 번호를 미리 수집합니다."""
    keys: Dict[Tuple[str, str], int] = {}
    sections: Dict[str, int] = {}
    current = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        match = _SECTION_RE.match(line)
        if match:
            current = match.group(1).strip()
            sections.setdefault(current, lineno)
            continue
        match = _KEY_RE.match(line)
        if match and current is not None and not line[:1].isspace():
            keys[(current, match.group(1).strip().lower())] = lineno
    return keys, sections


def _parse_error_line(error: configparser.Error) -> Optional[int]:
    lineno = getattr(error, "lineno", None)
    if lineno is None and getattr(error, "errors", None):
        lineno = error.errors[0][0]
    return lineno


def read_raw(path: PathLike) -> RawValues:
    """
    INI 파일을 섹션별 원시 문자열 값으로 읽습니다.

    Raises:
        AudioIOError: 파일이 없는 경우.
        ConfigError: 문법 오류 또는 알 수 없는 섹션 (줄 번호 포함).
    """
    path = Path(path)
    if not path.is_file():
        raise AudioIOError(f"설정 파일을 찾을 수 없습니다: {path}")
    text = path.read_text(encoding="utf-8")
    key_lines, section_lines = _scan_lines(text)

    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as e:
        raise ConfigError(f"설정 파일 문법 오류: {getattr(e, 'message', e)}", _parse_error_line(e)) from e

    raw: RawValues = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"알 수 없는 섹션입니다: [{section}]", section_lines.get(section))
        raw[section] = {
            key: (value, key_lines.get((section, key)))
            for key, value in parser.items(section)
        }
    return raw


def apply_overrides(raw: RawValues, overrides: Sequence[str]) -> RawValues:
    """
    "section.key=value" 형식의 덮어쓰기를 적용합니다.

    Raises:
        ConfigError: 형식이 잘못되었거나 섹션을 알 수 없는 경우.
    """
    for item in overrides or ():
        name, sep, value = item.partition("=")
        section, dot, key = name.strip().partition(".")
        if not sep or not dot or not key:
            raise ConfigError(f"덮어쓰기는 section.key=value 형식이어야 합니다: {item!r}")
        if section not in SECTIONS:
            raise ConfigError(f"알 수 없는 섹션입니다: [{section}] ({item!r})")
        raw.setdefault(section, {})[key.strip().lower()] = (value.strip(), None)
    return raw


def _coerce(value: str):
    """쉼표가 있으면 리스트, 빈 값은 None"""
    if value == "":
        return None
    if "," in value:
        return [part.strip() for part in value.split(",") if part.strip()]
    return value


def _build(model: Type[BaseModel], section: str, values: Dict[str, Tuple[str, Optional[int]]], extra=None):
    """섹션 값으로 pydantic 모델을 만들고, 오류는 해당 키의 줄 번호로 보고합니다."""
    fields = model.model_fields
    data = dict(extra or {})
    for key, (value, lineno) in values.items():
        if key not in fields:
            raise ConfigError(f"[{section}] 알 수 없는 키입니다: {key}", lineno)
        data[key] = _coerce(value)
    try:
        return model.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        key = str(first["loc"][0]) if first["loc"] else ""
        lineno = values.get(key, (None, None))[1]
        raise ConfigError(f"[{section}] {key}: {first['msg']}", lineno) from e


def build_run_config(raw: RawValues) -> RunConfig:
    """원시 값 → RunConfig (섹션 사이 기본값 연결 포함)."""
    features_raw = dict(raw.get("features", {}))
    stft_raw = {k: features_raw.pop(k) for k in list(features_raw) if k in StftConfig.model_fields}
    stft = _build(StftConfig, "features", stft_raw)
    features = _build(FeatureConfig, "features", features_raw, extra={"stft": stft})

    # 모델 입력 크기는 지정하지 않으면 특징 설정을 따릅니다
    model_defaults = {"input_frames": features.frames_per_segment, "input_bands": features.num_bands}
    model = _build(AcrnnConfig, "model", raw.get("model", {}), extra=model_defaults)

    mixup = _build(MixupConfig, "mixup", raw.get("mixup", {}))
    train = _build(TrainConfig, "train", raw.get("train", {}), extra={"mixup": mixup})

    return RunConfig(
        paths=_build(PathsConfig, "paths", raw.get("paths", {})),
        features=features,
        model=model,
        train=train,
        augment=_build(AugmentPlan, "augment", raw.get("augment", {})),
    )


def load_run_config(
    path: Optional[PathLike] = None,
    overrides: Optional[List[str]] = None,
    seed: Optional[int] = None,
    epochs: Optional[int] = None,
) -> RunConfig:
    """
    설정 파일과 명령행 덮어쓰기를 합쳐 RunConfig를 만듭니다.

    Args:
        path (Optional[PathLike]): INI 파일 경로 (없으면 기본값).
        overrides (Optional[List[str]]): "section.key=value" 목록.
        seed (Optional[int]): 학습/모델/증강 시드를 한 번에 덮어씁니다.
        epochs (Optional[int]): 학습 에폭 수.

    Returns:
        RunConfig: 검증된 설정.

    Raises:
        ConfigError: 파싱/검증 오류 (가능하면 줄 번호 포함).
    """
    raw = read_raw(path) if path else {}
    raw = apply_overrides(raw, overrides or [])
    if seed is not None:
        for section in ("train", "model", "augment"):
            raw.setdefault(section, {})["seed"] = (str(seed), None)
    if epochs is not None:
        raw.setdefault("train", {})["epochs"] = (str(epochs), None)
    cfg = build_run_config(raw)
    logger.debug(f"실행 설정 로드 완료: {cfg.summary()}")
    return cfg


def require_path(value: str, what: str, kind: str = "file") -> Path:
    """
    장시간 작업 시작 전에 입력 경로를 검증합니다.

    Raises:
        AudioIOError: 경로가 비었거나 존재하지 않는 경우.
    """
    if not value:
        raise AudioIOError(f"{what} 경로가 지정되지 않았습니다")
    path = Path(value)
    exists = path.is_dir() if kind == "dir" else path.is_file()
    if not exists:
        raise AudioIOError(f"{what}을(를) 찾을 수 없습니다: {path}")
    return path
