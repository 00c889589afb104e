import csv
import json
from types import SimpleNamespace

import numpy as np
import pytest

from acrnn.audio_module.schemas import MixupConfig
from acrnn.feature_module.schemas import LogGtSegment
from acrnn.shared.errors import ArgumentError
from acrnn.shared.schemas import ClipMeta
from acrnn.train_module.evaluator import (
    average_segment_probabilities,
    cross_validate,
    evaluate,
    group_by_clip,
    predict_clip,
    split_segments,
    write_confusion_csv,
    write_report_json,
)
from acrnn.train_module.schemas import TrainConfig

from conftest import band_segments, tiny_model_config


class BandModel:
    """채널 0 앞쪽 밴드 에너지가 크면 클래스 0으로 보는 고정 모델"""

    def __init__(self, num_classes=2):
        self.cfg = SimpleNamespace(numpy_dtype=np.float64, num_classes=num_classes)

    def predict_proba(self, batch):
        half = batch.shape[2] // 2
        score = batch[:, :, :half, 0].mean(axis=(1, 2)) - batch[:, :, half:, 0].mean(axis=(1, 2))
        p0 = 1.0 / (1.0 + np.exp(-score))
        probs = np.zeros((batch.shape[0], self.cfg.num_classes))
        probs[:, 0], probs[:, 1] = p0, 1.0 - p0
        return probs


def _segment(path, fold, class_id, value=0.0, index=0, provenance="original"):
    meta = ClipMeta(path=path, fold=fold, class_id=class_id)
    return LogGtSegment(data=np.full((4, 4, 2), value), clip=meta, segment_index=index, provenance=provenance)


def test_voting_averages_and_breaks_ties_low():
    mean, predicted = average_segment_probabilities(np.array([[0.6, 0.4], [0.2, 0.8]]))
    np.testing.assert_allclose(mean, [0.4, 0.6])
    assert predicted == 1
    assert average_segment_probabilities(np.array([[0.5, 0.5]]))[1] == 0
    assert average_segment_probabilities(np.array([[0.2, 0.4, 0.4]]))[1] == 1
    with pytest.raises(ArgumentError):
        average_segment_probabilities(np.zeros((0, 3)))


def test_predict_clip_is_mean_of_segment_probabilities():
    segments = band_segments(3, num_classes=1)
    model = BandModel()
    expected = model.predict_proba(np.stack([s.data for s in segments])).mean(axis=0)
    np.testing.assert_allclose(predict_clip(model, segments), expected)
    with pytest.raises(ArgumentError):
        predict_clip(model, [])


def test_group_by_clip_keeps_first_seen_order():
    segments = [_segment("b.wav", 1, 0), _segment("a.wav", 1, 0), _segment("b.wav", 1, 0, index=1)]
    groups = group_by_clip(segments)
    assert list(groups) == ["b.wav", "a.wav"]
    assert [s.segment_index for s in groups["b.wav"]] == [0, 1]


def test_accuracy_equals_confusion_trace():
    segments = band_segments(6, seed=3) + [_segment("wrong.wav", 1, 1, value=0.0)]
    report = evaluate(BandModel(3), segments, num_classes=3)
    matrix = np.array(report.confusion)
    assert matrix.shape == (3, 3)
    assert report.accuracy == np.trace(matrix) / matrix.sum()
    assert report.accuracy == pytest.approx(6 / 7)
    assert report.per_class_accuracy[0] == 1.0
    assert report.per_class_accuracy[1] == pytest.approx(3 / 4)
    assert report.per_class_accuracy[2] is None


def test_split_has_no_test_leakage():
    segments = [
        _segment("1-a.wav", 1, 0),
        _segment("1-a.wav", 1, 0, provenance="stretch:1.1000"),
        _segment("2-b.wav", 2, 1),
        _segment("2-b.wav", 2, 1, provenance="pitch:-1.0000"),
    ]
    train, test = split_segments(segments, test_fold=1)
    assert [s.clip_id for s in test] == ["1-a.wav"]
    assert {s.clip_id for s in train} == {"2-b.wav", "2-b.wav|pitch:-1.0000"}
    assert not {s.clip.path for s in train} & {s.clip.path for s in test}


def test_cross_validate_two_folds():
    segments = band_segments(8, fold=1, seed=1) + band_segments(8, fold=2, seed=2)
    train_cfg = TrainConfig(epochs=2, batch_size=8, lr_initial=0.05, init_std=0.1, mixup=MixupConfig(enabled=False))
    report = cross_validate(segments, tiny_model_config(), train_cfg)
    assert [f.fold for f in report.folds] == [1, 2]
    assert report.mean_accuracy == pytest.approx(np.mean([f.report.accuracy for f in report.folds]))
    assert all(f.train_segments == 8 for f in report.folds)
    assert report.setting == "l10-mlp"


def test_cross_validate_needs_two_folds():
    with pytest.raises(ArgumentError):
        cross_validate(band_segments(4), tiny_model_config(), TrainConfig(epochs=1))
    with pytest.raises(ArgumentError):
        cross_validate([], tiny_model_config(), TrainConfig(epochs=1))


def test_report_files(tmp_path):
    report = evaluate(BandModel(), band_segments(4))
    json_path = write_report_json(tmp_path / "out" / "report.json", report)
    payload = json.loads(json_path.read_text(encoding="utf-8"))
    assert payload["accuracy"] == report.accuracy

    csv_path = write_confusion_csv(tmp_path / "out" / "confusion.csv", report, ["dog", "rain"])
    with open(csv_path, encoding="utf-8", newline="") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["true\\pred", "dog", "rain"]
    assert [int(v) for v in rows[1][1:]] == report.confusion[0]
