"""Static arithmetic over front-end configurations.

Parameter counts, receptive fields, subsampling factors and output lengths,
computed from the configs alone (no weights, no audio).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .convstack import ConvLayerSpec, ConvStackConfig, build_config, min_input_length
from .dsp import SAMPLE_RATE, conv_output_length, same_padding
from .errors import ValidationError
from .gammatone import GammatoneConfig

# Published front-end sizes (parameters) and receptive fields (ms), with the
# tolerance each is checked at.
REFERENCE_PARAMS = {
    "gt": (35_000, 0.10),
    "sc": (40_000, 0.02),
    "w2v-large": (29_000_000, 0.02),
}
REFERENCE_RF_MS = {
    "gt": (65.0, 2.0),
    "sc": (40.0, 1.0),
    "w2v-regular": (210.0, 1.0),
    "w2v-large": (810.0, 1.0),
}

PARAM_NOTES = {
    "gt": (
        "counted as filter taps + integration window + per-channel mean/variance; "
        "the published 35k uses a counting convention that cannot be recovered exactly"
    ),
}


@dataclass(frozen=True)
class StackReport:
    name: str
    total_params: int
    per_layer_params: tuple[int, ...]
    receptive_field_samples: int
    subsampling_factor: int
    sample_rate: int = SAMPLE_RATE

    @property
    def receptive_field_ms(self) -> float:
        return self.receptive_field_samples * 1000.0 / self.sample_rate

    @property
    def frame_shift_ms(self) -> float:
        return self.subsampling_factor * 1000.0 / self.sample_rate


def layer_params(layer: ConvLayerSpec, include_norm: bool = True) -> int:
    if layer.sharing == "per_channel_shared":
        n = layer.num_shared * layer.kernel + (layer.num_shared if layer.bias else 0)
    else:
        n = layer.out_channels * layer.in_channels * layer.kernel + (layer.out_channels if layer.bias else 0)
    if include_norm and layer.normalization != "none":
        n += 2 * layer.out_channels
    return n


def param_count(cfg, include_norm: bool = True) -> int:
    """Trainable parameters of a config (or of a bare sequence of layer specs)."""
    if cfg is None:
        return 0
    layers = cfg.layers if isinstance(cfg, ConvStackConfig) else cfg
    return sum(layer_params(layer, include_norm) for layer in layers)


def receptive_field(cfg: ConvStackConfig) -> int:
    """Input samples one output frame depends on: 1 + sum (k_l - 1) * prod_{j<l} s_j."""
    rf, jump = 1, 1
    for layer in cfg.layers:
        rf += (layer.kernel - 1) * jump
        jump *= layer.stride
    return rf


def receptive_field_lead(cfg: ConvStackConfig) -> int:
    """Samples by which frame t's receptive field starts before ``t * subsampling``.

    Nonzero only when same-padded layers look backwards in time. Computed for
    inputs long enough that the padding split is the steady-state one.
    """
    lead, jump = 0, 1
    for layer in cfg.layers:
        if layer.padding == "same":
            left, _ = same_padding(10**6 * layer.stride, layer.kernel, layer.stride)
            lead += left * jump
        jump *= layer.stride
    return lead


def subsampling_factor(cfg: ConvStackConfig) -> int:
    return int(np.prod([layer.stride for layer in cfg.layers]))


def output_length(cfg: ConvStackConfig, num_samples: int) -> int:
    """Frames produced for ``num_samples`` input samples (0 if too short)."""
    length = num_samples
    for layer in cfg.layers:
        length = conv_output_length(length, layer.kernel, layer.stride, layer.padding)
        if length == 0:
            return 0
    return length


def alignment_padding(cfg: ConvStackConfig | GammatoneConfig) -> tuple[int, int]:
    """Zero padding (left, right) after which the stack yields floor(M / shift) frames.

    Padding every front-end this way puts all of them on the same frame grid,
    so their outputs can be concatenated without truncation.
    """
    if isinstance(cfg, GammatoneConfig):
        span, shift = cfg.receptive_field, cfg.window_shift
    else:
        span, shift = min_input_length(cfg), subsampling_factor(cfg)
    total = max(span - shift, 0)
    return total // 2, total - total // 2


def stack_report(cfg: ConvStackConfig, include_norm: bool = True) -> StackReport:
    per_layer = tuple(layer_params(layer, include_norm) for layer in cfg.layers)
    return StackReport(cfg.name, sum(per_layer), per_layer, receptive_field(cfg), subsampling_factor(cfg))


def gammatone_param_count(cfg: GammatoneConfig = GammatoneConfig(), include_norm: bool = True) -> int:
    n = cfg.num_filters * cfg.filter_length + cfg.window_width
    if include_norm:
        n += 2 * cfg.num_dct_coeffs
    return n


def gammatone_report(cfg: GammatoneConfig = GammatoneConfig(), include_norm: bool = True) -> StackReport:
    per_stage = (
        cfg.num_filters * cfg.filter_length,
        cfg.window_width,
        2 * cfg.num_dct_coeffs if include_norm else 0,
    )
    return StackReport("gt", sum(per_stage), per_stage, cfg.receptive_field, cfg.window_shift, cfg.sample_rate)


def report_for(feature_type: str, include_norm: bool = True) -> StackReport:
    if feature_type == "gt":
        return gammatone_report(include_norm=include_norm)
    return stack_report(build_config(feature_type), include_norm)


def within(value: float, reference: float, rel_tol: float) -> bool:
    return abs(value - reference) <= rel_tol * abs(reference)


def param_verdict(feature_type: str, report: StackReport) -> str | None:
    """'PASS'/'FAIL' against the published size, or None without a reference."""
    if feature_type not in REFERENCE_PARAMS:
        return None
    ref, tol = REFERENCE_PARAMS[feature_type]
    return "PASS" if within(report.total_params, ref, tol) else "FAIL"


def rf_verdict(feature_type: str, report: StackReport) -> str | None:
    if feature_type not in REFERENCE_RF_MS:
        return None
    ref, tol_ms = REFERENCE_RF_MS[feature_type]
    return "PASS" if abs(report.receptive_field_ms - ref) <= tol_ms else "FAIL"


def am_input_dim_delta(feature_dim_a: int, feature_dim_b: int, first_layer_units: int = 4000) -> int:
    """Change in acoustic-model size caused only by a different input dimension.

    Only the input weights of the first bidirectional layer depend on the
    feature dimension: ``(dim_a - dim_b) * first_layer_units * 2``. The default
    of 4000 rows assumes 1000 LSTM cells per direction with 4 gates each.
    """
    for value in (feature_dim_a, feature_dim_b, first_layer_units):
        if value < 1:
            raise ValidationError("dimensions and unit counts must be >= 1")
    return (feature_dim_a - feature_dim_b) * first_layer_units * 2


def format_report(feature_type: str, report: StackReport) -> str:
    """Human-readable table followed by a key=value block."""
    lines = [f"front-end: {feature_type} ({report.name})", "", f"  {'stage':<10}{'params':>14}"]
    if feature_type == "gt":
        labels = ["filters", "window", "norm"]
    else:
        labels = [f"layer {i}" for i in range(1, len(report.per_layer_params) + 1)]
    for label, n in zip(labels, report.per_layer_params):
        lines.append(f"  {label:<10}{n:>14,}")
    lines.append(f"  {'total':<10}{report.total_params:>14,}")
    lines.append("")
    lines.append(
        f"  receptive field: {report.receptive_field_samples} samples = {report.receptive_field_ms:.2f} ms"
    )
    lines.append(f"  subsampling:     {report.subsampling_factor} samples = {report.frame_shift_ms:.2f} ms")
    pv = param_verdict(feature_type, report)
    if pv is not None:
        ref, tol = REFERENCE_PARAMS[feature_type]
        lines.append(f"  params vs reference {ref:,} (+/-{tol:.0%}): {pv}")
    rv = rf_verdict(feature_type, report)
    if rv is not None:
        ref, tol = REFERENCE_RF_MS[feature_type]
        lines.append(f"  receptive field vs reference {ref:g} ms (+/-{tol:g} ms): {rv}")
    if feature_type in PARAM_NOTES:
        lines.append(f"  NOTE: {PARAM_NOTES[feature_type]}")
    lines.append("")
    kv = {
        "type": feature_type,
        "total_params": report.total_params,
        "per_layer_params": ",".join(str(n) for n in report.per_layer_params),
        "receptive_field_samples": report.receptive_field_samples,
        "receptive_field_ms": f"{report.receptive_field_ms:.4f}",
        "subsampling_factor": report.subsampling_factor,
        "frame_shift_ms": f"{report.frame_shift_ms:.4f}",
    }
    if pv is not None:
        kv["reference_params"] = REFERENCE_PARAMS[feature_type][0]
        kv["params_verdict"] = pv
    if rv is not None:
        kv["reference_rf_ms"] = REFERENCE_RF_MS[feature_type][0]
        kv["rf_verdict"] = rv
    lines.extend(f"{k}={v}" for k, v in kv.items())
    return "\n".join(lines)
