import pytest

from acrnn.model_module.complexity import conv_flops, count_flops, count_params, count_params_by_layer, gru_step_flops
from acrnn.model_module.schemas import AcrnnConfig, ablation_grid


def test_l10_attention_param_delta_is_closed_form():
    with_att = AcrnnConfig(attention_site="l10")
    without = AcrnnConfig(attention_site="none")
    width, hidden = 2 * with_att.gru_hidden, with_att.attention_hidden
    assert count_params(with_att) - count_params(without) == width * hidden + 2 * hidden

    linear = AcrnnConfig(attention_site="l10", rnn_attention_score="linear")
    assert count_params(linear) - count_params(without) == width


def test_cnn_attention_param_delta():
    base = count_params(AcrnnConfig(attention_site="none"))
    assert count_params(AcrnnConfig(attention_site="l4")) - base == 9 * 64 + 1


def test_totals_equal_row_sums():
    report = count_flops(AcrnnConfig())
    assert report.total_params == sum(r.params for r in report.rows)
    assert report.total_flops == sum(r.flops for r in report.rows)
    assert report.total_params == count_params(AcrnnConfig())
    assert [r.layer for r in report.rows if r.attention] == ["l10.att"]


def test_l10_attention_flops_closed_form():
    cfg = AcrnnConfig()
    steps, width, hidden = 7, 512, 128
    expected = steps * (2 * width * hidden + hidden) + steps * 2 * hidden + 2 * steps * width
    assert count_flops(cfg).attention_flops == expected


def test_l10_attention_overhead_is_below_one_percent():
    with_att = count_flops(AcrnnConfig(attention_site="l10"))
    without = count_flops(AcrnnConfig(attention_site="none"))
    overhead = with_att.total_flops - without.total_flops
    assert overhead == with_att.attention_flops
    assert overhead / with_att.total_flops < 0.01


def test_reference_rows_carry_published_values():
    reference = count_flops(AcrnnConfig()).reference
    assert reference["acrnn"]["params_m"] == pytest.approx(3.81)
    assert reference["acrnn"]["flops_m_with_attention"] == pytest.approx(9.18)
    assert reference["baseline_cnn"]["params_m"] == pytest.approx(31.53)


def test_unit_counters():
    assert conv_flops((3, 3), 1, 1, 1, 1) == 2 * 9 + 1
    assert gru_step_flops(2, 3) == 3 * (2 * 5 * 3 + 3) + 15


@pytest.mark.parametrize("cfg", ablation_grid(AcrnnConfig()), ids=lambda c: c.setting_label)
def test_every_setting_reports_one_row_per_layer(cfg):
    rows = count_params_by_layer(cfg)
    layers = [r.layer for r in rows if not r.attention]
    assert layers == ["l1", "l2", "l3", "l4", "l5", "l6", "l7", "l8", "l9", "l10", "dense"]
    assert sum(r.attention for r in rows) == (0 if cfg.attention_site == "none" else 1)
