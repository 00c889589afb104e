import csv
import json

import numpy as np
import pytest
from PIL import Image

from acrnn import cli
from acrnn.cli import attention_rows, main, render_heatmap
from acrnn.feature_module.feature_store import load_norm_stats, save_norm_stats
from acrnn.feature_module.schemas import LogGtSegment, NormStats
from acrnn.model_module.schemas import AttentionRecord
from acrnn.shared.errors import TrainingError

from conftest import save_tiny_checkpoint, write_tiny_ini


@pytest.fixture
def prepared(toy_dataset, tmp_path):
    ini = write_tiny_ini(tmp_path / "tiny.ini")
    store = tmp_path / "toy.lgt"
    code = main(["prepare", "--config", str(ini), "--dataset-root", str(toy_dataset), "--out", str(store)])
    assert code == 0
    return ini, store


def test_prepare_reports_folds_then_up_to_date(capsys, prepared, toy_dataset):
    ini, store = prepared
    first = capsys.readouterr().out
    assert "fold 1: 8 segments" in first and "fold 2: 8 segments" in first
    assert main(["prepare", "--config", str(ini), "--dataset-root", str(toy_dataset), "--out", str(store)]) == 0
    assert "up to date" in capsys.readouterr().out


def test_prepare_missing_dataset_is_io_error(tmp_path, capsys):
    code = main(["prepare", "--dataset-root", str(tmp_path / "missing"), "--out", str(tmp_path / "x.lgt")])
    assert code == 3
    assert "acrnn prepare: error:" in capsys.readouterr().err


def test_train_writes_outputs_and_refuses_to_clobber(prepared, tmp_path, capsys):
    ini, store = prepared
    reports = tmp_path / "reports"
    argv = ["train", "--config", str(ini), "--store", str(store), "--fold", "1", "--report-dir", str(reports)]
    assert main(argv) == 0
    checkpoint = reports / "fold1.ckpt"
    report = json.loads((reports / "fold1_report.json").read_text(encoding="utf-8"))
    assert 0.0 <= report["accuracy"] <= 1.0
    assert len(report["predictions"]) == 4
    with open(reports / "fold1_confusion.csv", encoding="utf-8", newline="") as f:
        assert next(csv.reader(f)) == ["true\\pred", "tone_low", "tone_high"]
    assert load_norm_stats(reports / "norm_fold1.txt").std[0] > 0
    first_bytes = checkpoint.read_bytes()

    assert main(argv) == 2
    assert "--force" in capsys.readouterr().err

    assert main(argv + ["--force"]) == 0
    assert checkpoint.read_bytes() == first_bytes


def test_train_unknown_fold_and_missing_store(prepared, tmp_path):
    ini, store = prepared
    assert main(["train", "--config", str(ini), "--store", str(store), "--fold", "5",
                 "--report-dir", str(tmp_path / "r")]) == 2
    assert main(["train", "--config", str(ini), "--store", str(tmp_path / "none.lgt"), "--fold", "1"]) == 3


def test_bad_override_is_argument_error(prepared):
    ini, store = prepared
    assert main(["train", "--config", str(ini), "--store", str(store), "--fold", "1",
                 "--set", "model.attention_site=l11"]) == 2


def test_divergence_maps_to_numeric_exit_code(prepared, tmp_path, monkeypatch):
    ini, store = prepared

    def diverge(*args, **kwargs):
        raise TrainingError(0, 1, "loss is nan")

    monkeypatch.setattr(cli, "train_fold", diverge)
    assert main(["train", "--config", str(ini), "--store", str(store), "--fold", "1",
                 "--report-dir", str(tmp_path / "r")]) == 4


def test_eval_checkpoint_on_fold(prepared, tmp_path, capsys):
    ini, store = prepared
    checkpoint = save_tiny_checkpoint(tmp_path / "m.ckpt")
    out = tmp_path / "eval.json"
    code = main(["eval", "--config", str(ini), "--checkpoint", str(checkpoint), "--store", str(store),
                 "--fold", "2", "--out", str(out)])
    assert code == 0
    assert "fold 2: accuracy" in capsys.readouterr().out
    assert json.loads(out.read_text(encoding="utf-8"))["num_classes"] == 2


def test_eval_reads_norm_stats_file(prepared, tmp_path):
    ini, store = prepared
    checkpoint = save_tiny_checkpoint(tmp_path / "m.ckpt")
    base = ["eval", "--config", str(ini), "--checkpoint", str(checkpoint), "--store", str(store), "--fold", "2"]
    assert main(base + ["--out", str(tmp_path / "default.json")]) == 0

    stats = save_norm_stats(tmp_path / "norm_fold1.txt", NormStats(mean=[40.0, 5.0], std=[0.01, 0.01]))
    assert main(base + ["--norm-stats", str(stats), "--out", str(tmp_path / "file.json")]) == 0
    default = json.loads((tmp_path / "default.json").read_text(encoding="utf-8"))
    from_file = json.loads((tmp_path / "file.json").read_text(encoding="utf-8"))
    assert [p["probabilities"] for p in default["predictions"]] != [p["probabilities"] for p in from_file["predictions"]]

    assert main(base + ["--norm-stats", str(tmp_path / "absent.txt")]) == 3


def test_cv_writes_fold_reports(prepared, tmp_path):
    ini, store = prepared
    out = tmp_path / "cv"
    assert main(["cv", "--config", str(ini), "--store", str(store), "--out", str(out), "--epochs", "1"]) == 0
    report = json.loads((out / "cv_l10-mlp.json").read_text(encoding="utf-8"))
    assert [f["fold"] for f in report["folds"]] == [1, 2]
    assert (out / "cv_l10-mlp_fold2_confusion.csv").is_file()
    for fold in (1, 2):
        assert load_norm_stats(out / f"norm_fold{fold}.txt") == NormStats(**report["folds"][fold - 1]["norm_stats"])


def test_cv_ablation_table(prepared, tmp_path):
    ini, store = prepared
    out = tmp_path / "ablation"
    assert main(["cv", "--config", str(ini), "--store", str(store), "--out", str(out),
                 "--epochs", "1", "--ablation"]) == 0
    with open(out / "ablation.csv", encoding="utf-8", newline="") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["setting", "mean_accuracy", "fold_1", "fold_2"]
    assert len(rows) == 12
    assert rows[1][0] == "none"
    for row in rows[1:]:
        assert float(row[1]) == pytest.approx((float(row[2]) + float(row[3])) / 2, abs=1e-6)


def test_attn_viz_rejects_checkpoint_without_attention(toy_dataset, tmp_path, capsys):
    checkpoint = save_tiny_checkpoint(tmp_path / "none.ckpt", attention_site="none")
    code = main(["attn-viz", "--checkpoint", str(checkpoint), "--clip", str(toy_dataset / "audio" / "1-0-0.wav"),
                 "--out", str(tmp_path / "viz")])
    assert code == 2
    assert "attention" in capsys.readouterr().err


def test_attn_viz_writes_weights_and_heatmap(toy_dataset, tmp_path):
    checkpoint = save_tiny_checkpoint(tmp_path / "l4.ckpt", attention_site="l4")
    out = tmp_path / "viz"
    code = main(["attn-viz", "--checkpoint", str(checkpoint), "--clip", str(toy_dataset / "audio" / "1-0-0.wav"),
                 "--out", str(out)])
    assert code == 0
    with open(out / "attention.csv", encoding="utf-8", newline="") as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 2 * 6
    assert all(0.0 < float(r["weight"]) < 1.0 for r in rows)
    with Image.open(out / "heatmap.pgm") as image:
        assert image.mode == "L"
        assert image.size == (2 * 18, 32 + cli.HEATMAP_WEIGHT_ROWS)


def test_l10_attention_rows_sum_to_one():
    record = AttentionRecord(site="l10", scaling="softmax", weights=np.array([[0.25, 0.75], [0.5, 0.5]]))
    rows = attention_rows(record)
    assert rows[:2] == [(0, 0, 0.25), (0, 1, 0.75)]
    for segment_id in (0, 1):
        assert sum(w for s, _, w in rows if s == segment_id) == pytest.approx(1.0)


def test_heatmap_puts_low_bands_at_the_bottom():
    ramp = np.tile(np.arange(32.0)[None, :, None], (18, 1, 2))
    segments = [LogGtSegment(data=ramp), LogGtSegment(data=ramp)]
    record = AttentionRecord(site="l10", scaling="softmax", weights=np.array([[1.0], [1.0]]))
    image = render_heatmap(segments, record)
    assert image.shape == (32 + cli.HEATMAP_WEIGHT_ROWS, 36)
    assert image.dtype == np.uint8
    assert np.all(image[31] == 0) and np.all(image[0] == 255)
    np.testing.assert_array_equal(image[32:], 255)


def test_complexity_table(capsys):
    assert main(["complexity"]) == 0
    out = capsys.readouterr().out
    assert "setting: l10-mlp" in out
    assert "reference acrnn: 3.81 M params" in out
    total = next(line for line in out.splitlines() if line.startswith("total"))
    assert "4,285,490" in total


def test_complexity_ablation(capsys):
    assert main(["complexity", "--ablation"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 12
    assert lines[1].startswith("none")


def test_missing_required_argument_exits_with_usage():
    with pytest.raises(SystemExit) as info:
        main(["train"])
    assert info.value.code == 2
