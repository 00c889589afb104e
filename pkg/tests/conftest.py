"""공통 fixture / hypothesis 프로파일 / 합성 데이터 생성기"""

import csv
import os
from pathlib import Path
from typing import List, Sequence

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from acrnn.audio_module.audio_io import write_clip
from acrnn.config import Config
from acrnn.feature_module.schemas import FeatureConfig, LogGtSegment, NormStats, StftConfig
from acrnn.model_module.acrnn import AcrnnModel
from acrnn.model_module.schemas import AcrnnConfig
from acrnn.shared.schemas import AudioClip, ClipMeta
from acrnn.train_module.checkpoint import checkpoint_from_model, save_checkpoint
from acrnn.train_module.trainer import init_weights

settings.register_profile("fast", max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("debugger", max_examples=5, deadline=None, report_multiple_bugs=False)
settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "fast"))

SR = 8000


@pytest.fixture(autouse=True)
def _isolated_logs(tmp_path, monkeypatch):
    """실행 로그를 테스트 임시 디렉토리로 보냅니다."""
    monkeypatch.setattr(Config, "LOG_DIR", tmp_path / "logs")


# ----------------------------------------------------------------------
# 소형 설정
# ----------------------------------------------------------------------

def tiny_feature_config(**overrides) -> FeatureConfig:
    """8kHz, 256/128 STFT, 32밴드, 18프레임 세그먼트"""
    values = dict(
        sample_rate_hz=SR,
        stft=StftConfig(window_len=256, hop=128),
        num_bands=32,
        frames_per_segment=18,
        overlap=0.5,
    )
    values.update(overrides)
    return FeatureConfig(**values)


def tiny_model_config(**overrides) -> AcrnnConfig:
    values = dict(
        num_classes=2,
        conv_filters=(4, 4, 8, 8),
        gru_hidden=8,
        attention_hidden=6,
        input_frames=18,
        input_bands=32,
        dropout_p=0.0,
    )
    values.update(overrides)
    return AcrnnConfig(**values)


@pytest.fixture
def feature_cfg() -> FeatureConfig:
    return tiny_feature_config()


@pytest.fixture
def model_cfg() -> AcrnnConfig:
    return tiny_model_config()


# ----------------------------------------------------------------------
# 합성 신호
# ----------------------------------------------------------------------

def tone(freq_hz: float, seconds: float, sr: int = SR, amplitude: float = 0.5) -> np.ndarray:
    t = np.arange(int(seconds * sr)) / sr
    return amplitude * np.sin(2 * np.pi * freq_hz * t)


def make_clip(samples: np.ndarray, sr: int = SR) -> AudioClip:
    return AudioClip(samples=samples, sample_rate_hz=sr)


def band_segments(count: int, num_classes: int = 2, frames: int = 18, bands: int = 32, fold: int = 1,
                  seed: int = 0, prefix: str = "clip") -> List[LogGtSegment]:
    """클래스마다 에너지가 몰린 밴드 위치가 다른 합성 세그먼트"""
    rng = np.random.default_rng(seed)
    width = bands // num_classes
    segments = []
    for i in range(count):
        label = i % num_classes
        data = rng.normal(0.0, 0.3, size=(frames, bands, 2))
        data[:, label * width: (label + 1) * width, 0] += 3.0
        meta = ClipMeta(path=f"{prefix}{fold}_{i}.wav", fold=fold, class_id=label, class_name=f"class{label}")
        segments.append(LogGtSegment(data=data, clip=meta))
    return segments


def write_dataset(root: Path, rows: Sequence[tuple], sr: int = SR, seconds: float = 0.5, esc10=None) -> Path:
    """
    ESC-50 레이아웃 (meta/esc50.csv + audio/) 합성 데이터셋.

    rows: (filename, fold, target, category) 목록. target마다 다른 주파수의 톤을 씁니다.
    """
    (root / "audio").mkdir(parents=True, exist_ok=True)
    (root / "meta").mkdir(parents=True, exist_ok=True)
    with open(root / "meta" / "esc50.csv", "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["filename", "fold", "target", "category", "esc10"])
        for index, (filename, fold, target, category) in enumerate(rows):
            flag = "True" if esc10 is None or esc10[index] else "False"
            writer.writerow([filename, fold, target, category, flag])
            samples = tone(300.0 + 400.0 * target, seconds, sr) + 0.01 * np.sin(np.arange(int(seconds * sr)) * (index + 1))
            write_clip(root / "audio" / filename, make_clip(samples, sr))
    return root


@pytest.fixture
def toy_dataset(tmp_path) -> Path:
    """2 클래스 × 2 폴드 × 2 클립"""
    rows = [
        (f"{fold}-{target}-{k}.wav", fold, target, ["tone_low", "tone_high"][target])
        for fold in (1, 2)
        for target in (0, 1)
        for k in range(2)
    ]
    return write_dataset(tmp_path / "dataset", rows)


# ----------------------------------------------------------------------
# 설정 파일 / 체크포인트
# ----------------------------------------------------------------------

TINY_INI = """\
[features]
sample_rate_hz = 8000
window_len = 256
hop = 128
num_bands = 32
frames_per_segment = 18

[model]
conv_filters = 4, 4, 8, 8
gru_hidden = 8
attention_hidden = 6
dropout_p = 0

[train]
epochs = 2
batch_size = 8
lr_initial = 0.05
init_std = 0.1

[mixup]
enabled = false
"""


def write_tiny_ini(path: Path) -> Path:
    path.write_text(TINY_INI, encoding="utf-8")
    return path


def save_tiny_checkpoint(path: Path, seed: int = 0, **model_overrides) -> Path:
    """소형 설정으로 초기화만 한 모델의 체크포인트"""
    model = init_weights(AcrnnModel(tiny_model_config(**model_overrides)), 0.1, np.random.default_rng(seed))
    checkpoint = checkpoint_from_model(
        model,
        NormStats(mean=[-5.0, 0.0], std=[3.0, 0.5]),
        epoch=1,
        feature_cfg=tiny_feature_config(),
        class_names=["tone_low", "tone_high"],
    )
    return save_checkpoint(path, checkpoint)
