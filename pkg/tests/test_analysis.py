import numpy as np
import pytest

from rawfront import analysis
from rawfront.convstack import ConvLayerSpec, ConvStackConfig, build_config, init_weights
from rawfront.errors import ValidationError
from rawfront.gammatone import GammatoneConfig, GammatoneExtractor


@pytest.mark.parametrize(
    "ftype, samples, ms",
    [("sc", 646, 40.375), ("w2v-regular", 3345, 209.0625), ("w2v-large", 12945, 809.0625)],
)
def test_receptive_fields(ftype, samples, ms):
    report = analysis.report_for(ftype)
    assert report.receptive_field_samples == samples
    assert report.receptive_field_ms == pytest.approx(ms)
    assert analysis.rf_verdict(ftype, report) == "PASS"


def test_gammatone_receptive_field():
    report = analysis.report_for("gt")
    assert report.receptive_field_samples == 640 + 400 - 1 == 1039
    assert analysis.rf_verdict("gt", report) == "PASS"


def test_param_counts():
    assert analysis.param_count(build_config("sc")) == 40_255
    assert analysis.param_count(build_config("sc"), include_norm=False) == 38_755
    assert analysis.param_count(build_config("w2v-large")) == 29_372_416
    assert analysis.param_count(build_config("w2v-large"), include_norm=False) == 29_365_248
    assert analysis.param_count(build_config("w2v-regular")) == 12_331_008
    assert analysis.param_count(build_config("w2v-regular"), include_norm=False) == 12_325_888
    assert analysis.gammatone_param_count() == 50 * 640 + 400 + 100 == 32_500


@pytest.mark.parametrize("ftype", ["gt", "sc", "w2v-large"])
def test_param_verdicts(ftype):
    assert analysis.param_verdict(ftype, analysis.report_for(ftype)) == "PASS"


def test_param_count_matches_archive():
    for ftype in ("sc", "w2v-regular", "w2v-large"):
        assert analysis.param_count(build_config(ftype)) == init_weights(build_config(ftype)).num_elements()
    archive = GammatoneExtractor(norm_stats=(np.zeros(50), np.ones(50))).to_archive()
    assert archive.num_elements() == analysis.gammatone_param_count()


def test_trivial_stacks():
    assert analysis.param_count([]) == 0
    assert analysis.param_count(None) == 0
    cfg = ConvStackConfig("one", (ConvLayerSpec(1, 1, 1, bias=False),), 1)
    assert analysis.receptive_field(cfg) == 1
    assert analysis.param_count(cfg) == 1
    assert analysis.output_length(cfg, 7) == 7


@pytest.mark.parametrize("ftype", ["sc", "w2v-regular", "w2v-large"])
def test_subsampling_is_ten_ms(ftype):
    report = analysis.report_for(ftype)
    assert report.subsampling_factor == 160
    assert report.frame_shift_ms == 10.0


def test_lead():
    assert analysis.receptive_field_lead(build_config("sc")) == 0
    assert analysis.receptive_field_lead(build_config("w2v-regular")) == 1440
    assert analysis.receptive_field_lead(build_config("w2v-large")) == 5760


@pytest.mark.parametrize("ftype", ["sc", "w2v-regular", "w2v-large"])
def test_alignment_padding_frame_grid(ftype):
    cfg = build_config(ftype)
    left, right = analysis.alignment_padding(cfg)
    for m in (16000, 32000, 59200, 16159, 16161):
        assert analysis.output_length(cfg, m + left + right) == m // 160


def test_alignment_padding_gammatone():
    cfg = GammatoneConfig()
    left, right = analysis.alignment_padding(cfg)
    assert cfg.num_frames(16000 + left + right) == 100


def test_am_input_dim_delta():
    assert analysis.am_input_dim_delta(50, 50) == 0
    assert analysis.am_input_dim_delta(512, 50) == 3_696_000
    assert analysis.am_input_dim_delta(750, 50) == 5_600_000
    assert analysis.am_input_dim_delta(562, 50) > analysis.am_input_dim_delta(512, 50)
    # AM sizes 152M (GT) vs 156M (w2v, 512) vs 158M (SC, 750): deltas of a few million
    assert analysis.am_input_dim_delta(512, 50) == pytest.approx(4e6, rel=0.1)
    assert analysis.am_input_dim_delta(750, 512) == pytest.approx(2e6, rel=0.1)
    with pytest.raises(ValidationError):
        analysis.am_input_dim_delta(0, 50)


def test_format_report():
    text = analysis.format_report("w2v-large", analysis.report_for("w2v-large"))
    assert "29,372,416" in text
    assert "total_params=29372416" in text
    assert "receptive_field_samples=12945" in text
    assert "params_verdict=PASS" in text and "rf_verdict=PASS" in text
    gt = analysis.format_report("gt", analysis.report_for("gt"))
    assert "NOTE:" in gt and "total_params=32500" in gt
