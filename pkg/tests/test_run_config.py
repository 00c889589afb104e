import textwrap

import pytest

from acrnn.config import Config
from acrnn.run_config import load_run_config, require_path
from acrnn.shared.errors import AudioIOError, ConfigError


def write_ini(tmp_path, text):
    path = tmp_path / "run.ini"
    path.write_text(textwrap.dedent(text).lstrip(), encoding="utf-8")
    return path


def test_defaults_without_file(monkeypatch):
    monkeypatch.setattr(Config, "FEATURE_STORE", "/data/esc50.lgt")
    cfg = load_run_config()
    assert cfg.train.epochs == 300 and cfg.train.batch_size == 64
    assert cfg.model.attention_site == "l10"
    assert cfg.features.stft.window_len == 1024
    assert cfg.paths.feature_store == "/data/esc50.lgt"


def test_sections_are_parsed_and_linked(tmp_path):
    path = write_ini(tmp_path, """
        [features]
        sample_rate_hz = 8000
        window_len = 256
        hop = 128
        num_bands = 32
        frames_per_segment = 18   # 짧은 세그먼트

        [model]
        num_classes = 2
        conv_filters = 4, 4, 8, 8
        attention_site = l4
        cnn_attention_scaling = softmax

        [train]
        epochs = 5
        lr_initial = 0.05

        [mixup]
        alpha = 0.4

        [augment]
        stretch_range = 0.9, 1.1
    """)
    cfg = load_run_config(path)
    assert cfg.features.stft.window_len == 256 and cfg.features.stft.hop == 128
    assert (cfg.model.input_frames, cfg.model.input_bands) == (18, 32)
    assert cfg.model.conv_filters == (4, 4, 8, 8)
    assert cfg.model.setting_label == "l4-softmax"
    assert cfg.train.epochs == 5 and cfg.train.mixup.alpha == 0.4
    assert cfg.augment.stretch_range == (0.9, 1.1)


def test_invalid_value_reports_its_line(tmp_path):
    path = write_ini(tmp_path, """
        [train]
        epochs = 10

        batch_size = -3
    """)
    with pytest.raises(ConfigError) as info:
        load_run_config(path)
    assert info.value.line == 4
    assert info.value.exit_code == 2


def test_unknown_key_reports_its_line(tmp_path):
    path = write_ini(tmp_path, """
        [model]
        num_classes = 10
        attenton_site = l10
    """)
    with pytest.raises(ConfigError) as info:
        load_run_config(path)
    assert info.value.line == 3
    assert "attenton_site" in str(info.value)


def test_unknown_section_reports_its_line(tmp_path):
    path = write_ini(tmp_path, """
        [train]
        epochs = 1
        [optimizer]
        lr = 0.1
    """)
    with pytest.raises(ConfigError) as info:
        load_run_config(path)
    assert info.value.line == 3


def test_syntax_error_reports_line(tmp_path):
    path = write_ini(tmp_path, "epochs = 1\n")
    with pytest.raises(ConfigError) as info:
        load_run_config(path)
    assert info.value.line == 1


def test_overrides_and_flags_take_precedence(tmp_path):
    path = write_ini(tmp_path, """
        [train]
        epochs = 10
        seed = 1
    """)
    cfg = load_run_config(path, overrides=["train.epochs=20", "model.dropout_p = 0.25"], seed=9, epochs=3)
    assert cfg.train.epochs == 3
    assert cfg.model.dropout_p == 0.25
    assert cfg.train.seed == cfg.model.seed == cfg.augment.seed == 9


@pytest.mark.parametrize("override", ["epochs=3", "train.epochs", "nope.key=1"])
def test_malformed_override(override):
    with pytest.raises(ConfigError):
        load_run_config(overrides=[override])


def test_missing_config_file(tmp_path):
    with pytest.raises(AudioIOError):
        load_run_config(tmp_path / "absent.ini")


def test_require_path(tmp_path):
    assert require_path(str(tmp_path), "데이터셋", kind="dir") == tmp_path
    with pytest.raises(AudioIOError):
        require_path("", "특징 저장소")
    with pytest.raises(AudioIOError):
        require_path(str(tmp_path / "x.lgt"), "특징 저장소")
