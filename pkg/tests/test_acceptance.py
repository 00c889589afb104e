"""
합성 4-클래스 데이터셋 기반 통합 검증 (느림: pytest -m slow)
"""

import numpy as np
import pytest
from scipy.signal import chirp

from acrnn.audio_module.schemas import MixupConfig
from acrnn.feature_module.extractor import FeatureExtractor, apply_norm
from acrnn.model_module.acrnn import AcrnnModel
from acrnn.shared.schemas import ClipMeta
from acrnn.train_module.checkpoint import encode_checkpoint, model_from_checkpoint
from acrnn.train_module.evaluator import cross_validate
from acrnn.train_module.schemas import TrainConfig
from acrnn.train_module.trainer import train_fold

from conftest import SR, make_clip, tiny_feature_config, tiny_model_config

pytestmark = pytest.mark.slow

CLASSES = ("tone", "noise_burst", "chirp", "am_noise")
CLIP_SECONDS = 1.0


def synth(kind: str, rng: np.random.Generator, n: int = int(CLIP_SECONDS * SR)) -> np.ndarray:
    t = np.arange(n) / SR
    if kind == "tone":
        return 0.5 * np.sin(2 * np.pi * rng.uniform(300, 2000) * t)
    if kind == "noise_burst":
        out = 1e-3 * rng.normal(size=n)
        burst = min(n // 2, int(0.3 * SR))
        start = rng.integers(0, n - burst)
        out[start: start + burst] += 0.3 * rng.normal(size=burst)
        return out
    if kind == "chirp":
        return 0.5 * chirp(t, f0=rng.uniform(200, 500), t1=n / SR, f1=rng.uniform(2000, 3500), method="linear")
    envelope = 0.5 * (1 + np.sin(2 * np.pi * rng.uniform(4, 8) * t))
    return 0.3 * envelope * rng.normal(size=n)


def toy_segments(clips_per_class: int = 40, folds: int = 2, seed: int = 0):
    rng = np.random.default_rng(seed)
    extractor = FeatureExtractor(tiny_feature_config(frames_per_segment=36))
    segments = []
    for class_id, kind in enumerate(CLASSES):
        for k in range(clips_per_class):
            meta = ClipMeta(path=f"{kind}_{k}.wav", fold=k % folds + 1, class_id=class_id, class_name=kind)
            segments += extractor.extract(make_clip(synth(kind, rng)), meta)
    return segments


def toy_configs(**model_overrides):
    model_cfg = tiny_model_config(
        num_classes=4, conv_filters=(8, 8, 16, 16), gru_hidden=16, attention_hidden=8, input_frames=36,
        **model_overrides,
    )
    train_cfg = TrainConfig(epochs=30, batch_size=16, lr_initial=0.05, lr_decay_every=20, init_std=0.1, seed=3)
    return model_cfg, train_cfg


def test_toy_benchmark_accuracy_and_attention_gap():
    segments = toy_segments()
    model_cfg, train_cfg = toy_configs()
    with_attention = cross_validate(segments, model_cfg, train_cfg)
    without = cross_validate(segments, model_cfg.model_copy(update={"attention_site": "none"}), train_cfg)
    assert with_attention.mean_accuracy >= 0.9
    assert with_attention.mean_accuracy >= without.mean_accuracy - 0.02


def test_toy_benchmark_is_deterministic():
    segments = toy_segments(clips_per_class=10)
    model_cfg, train_cfg = toy_configs()
    train_cfg = train_cfg.model_copy(update={"epochs": 5})
    first = train_fold(segments, train_cfg, model_cfg)
    second = train_fold(segments, train_cfg, model_cfg)
    assert encode_checkpoint(first.checkpoint) == encode_checkpoint(second.checkpoint)
    assert first.history.model_dump_json() == second.history.model_dump_json()


def silence_then_event(kind: str, rng: np.random.Generator, frames: int = 72, hop: int = 128, window: int = 256):
    n = window + (frames - 1) * hop
    out = 1e-4 * rng.normal(size=n)
    half = n // 2
    out[half:] += synth(kind, rng, n - half)
    return out


def test_l10_attention_focuses_on_event_frames():
    rng = np.random.default_rng(7)
    extractor = FeatureExtractor(tiny_feature_config(frames_per_segment=72))
    segments = []
    for class_id, kind in enumerate(CLASSES):
        for k in range(20):
            meta = ClipMeta(path=f"{kind}_{k}.wav", fold=1, class_id=class_id, class_name=kind)
            segments += extractor.extract(make_clip(silence_then_event(kind, rng)), meta)

    model_cfg, train_cfg = toy_configs(input_frames=72)
    train_cfg = train_cfg.model_copy(update={"mixup": MixupConfig(enabled=False)})
    result = train_fold(segments, train_cfg, model_cfg)
    model: AcrnnModel = model_from_checkpoint(result.checkpoint)

    focused = 0
    for trial in range(50):
        kind = CLASSES[trial % len(CLASSES)]
        segment = extractor.extract(make_clip(silence_then_event(kind, rng)))[0]
        batch = apply_norm(segment, result.checkpoint.norm_stats).data[None].astype(np.float32)
        _, record = model.forward(batch, record_attention=True)
        weights = record.weights[0]
        half = weights.size // 2
        focused += weights[half:].mean() > weights[:half].mean()
    assert focused >= 45
