"""Declarative 1-D convolutional front-ends and their forward pass.

Two families ship with the package:

* supervised convolutional (SC): a time-frequency filter layer followed by
  rectification and a bank of low-pass filters shared across all tf channels;
* wav2vec (regular / large): a strided encoder and a stride-1 context network,
  512 channels, ReLU.

Per layer the computation order is::

    conv (+bias) -> group norm -> activation -> root compression
                 -> layer norm -> residual add

where each stage is present only if the layer spec asks for it. Weight tensors
are named ``<stack>.layer<i>.weight`` / ``.bias`` / ``.norm.weight`` /
``.norm.bias`` with ``i`` counting from 1. Full layers store
``(out_channels, in_channels, kernel)``; shared low-pass layers store only
the ``(N, 1, kernel)`` shared kernels, which is also what they cost in
parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import dsp
from .dsp import FeatureMatrix, Waveform
from .errors import InputTooShortError, ShapeMismatchError, ValidationError
from .io import WeightArchive

ACTIVATIONS = ("none", "relu", "abs")
NORMALIZATIONS = ("none", "group_norm_single", "layer_norm")
PADDINGS = ("valid", "same")
SHARING = ("full", "per_channel_shared")

NORM_EPS = 1e-5


@dataclass(frozen=True)
class ConvLayerSpec:
    in_channels: int
    out_channels: int
    kernel: int
    stride: int = 1
    activation: str = "none"
    normalization: str = "none"
    padding: str = "valid"
    skip: bool = False
    sharing: str = "full"
    bias: bool = False
    compression: float | None = None

    def __post_init__(self):
        if self.kernel < 1 or self.stride < 1:
            raise ValidationError("kernel and stride must be >= 1")
        if self.in_channels < 1 or self.out_channels < 1:
            raise ValidationError("channel counts must be >= 1")
        for value, allowed, what in (
            (self.activation, ACTIVATIONS, "activation"),
            (self.normalization, NORMALIZATIONS, "normalization"),
            (self.padding, PADDINGS, "padding"),
            (self.sharing, SHARING, "sharing"),
        ):
            if value not in allowed:
                raise ValidationError(f"unknown {what} {value!r}; choose from {allowed}")
        if self.skip and (self.in_channels != self.out_channels or self.stride != 1):
            raise ValidationError("skip connections need in_channels == out_channels and stride 1")
        if self.sharing == "per_channel_shared" and self.out_channels % self.in_channels:
            raise ValidationError("shared layers need out_channels to be a multiple of in_channels")
        if self.compression is not None and not 0 < self.compression <= 1:
            raise ValidationError("compression exponent must lie in (0, 1]")

    @property
    def num_shared(self) -> int:
        """Kernels shared across input channels (N); 0 for full layers."""
        if self.sharing != "per_channel_shared":
            return 0
        return self.out_channels // self.in_channels

    @property
    def weight_shape(self) -> tuple[int, int, int]:
        if self.sharing == "per_channel_shared":
            return (self.num_shared, 1, self.kernel)
        return (self.out_channels, self.in_channels, self.kernel)

    @property
    def bias_shape(self) -> tuple[int]:
        return (self.num_shared,) if self.sharing == "per_channel_shared" else (self.out_channels,)

    @property
    def norm_shape(self) -> tuple[int] | None:
        return None if self.normalization == "none" else (self.out_channels,)

    def output_length(self, length: int) -> int:
        return dsp.conv_output_length(length, self.kernel, self.stride, self.padding)


@dataclass(frozen=True)
class ConvStackConfig:
    name: str
    layers: tuple[ConvLayerSpec, ...]
    final_feature_dim: int
    description: str = field(default="", compare=False)

    def __post_init__(self):
        layers = tuple(self.layers)
        object.__setattr__(self, "layers", layers)
        if not layers:
            raise ValidationError("a conv stack needs at least one layer")
        if layers[0].in_channels != 1:
            raise ValidationError("the first layer must read the single waveform channel")
        for i, (prev, cur) in enumerate(zip(layers, layers[1:]), start=2):
            if prev.out_channels != cur.in_channels:
                raise ValidationError(
                    f"layer {i} expects {cur.in_channels} input channels, layer {i - 1} gives {prev.out_channels}"
                )
        if layers[-1].out_channels != self.final_feature_dim:
            raise ValidationError("final_feature_dim must equal the last layer's out_channels")

    def tensor_name(self, index: int, what: str = "weight") -> str:
        return f"{self.name}.layer{index + 1}.{what}"

    def expected_tensors(self) -> dict[str, tuple[int, ...]]:
        """Every tensor name a complete weight set carries, with its shape."""
        shapes = {}
        for i, layer in enumerate(self.layers):
            shapes[self.tensor_name(i)] = layer.weight_shape
            if layer.bias:
                shapes[self.tensor_name(i, "bias")] = layer.bias_shape
            if layer.norm_shape is not None:
                shapes[self.tensor_name(i, "norm.weight")] = layer.norm_shape
                shapes[self.tensor_name(i, "norm.bias")] = layer.norm_shape
        return shapes


def build_sc_config(
    tf_filters: int = 150,
    tf_kernel: int = 256,
    tf_stride: int = 10,
    envelope_filters: int = 5,
    envelope_kernel: int = 40,
    envelope_stride: int = 16,
    compression_exponent: float = 0.1,
) -> ConvStackConfig:
    """Supervised convolutional front-end: 150 tf filters, 5 shared low-passes."""
    layers = (
        ConvLayerSpec(1, tf_filters, tf_kernel, tf_stride, activation="abs", bias=True),
        ConvLayerSpec(
            tf_filters,
            tf_filters * envelope_filters,
            envelope_kernel,
            envelope_stride,
            activation="abs",
            normalization="layer_norm",
            sharing="per_channel_shared",
            bias=True,
            compression=compression_exponent,
        ),
    )
    return ConvStackConfig("sc", layers, tf_filters * envelope_filters, "supervised convolutional")


W2V_ENCODER = ((10, 5), (8, 4), (4, 2), (4, 2), (4, 2))
W2V_VARIANTS = ("regular", "large")


def build_w2v_config(variant: str = "large", channels: int = 512) -> ConvStackConfig:
    """wav2vec conv stack; ``regular`` is 5+9 layers, ``large`` is 7+12."""
    if variant not in W2V_VARIANTS:
        raise ValidationError(f"unknown wav2vec variant {variant!r}; choose from {W2V_VARIANTS}")
    layers = []
    in_ch = 1
    for kernel, stride in W2V_ENCODER:
        layers.append(
            ConvLayerSpec(in_ch, channels, kernel, stride, activation="relu", normalization="group_norm_single")
        )
        in_ch = channels
    if variant == "large":
        for _ in range(2):
            layers.append(
                ConvLayerSpec(
                    channels, channels, 1, 1, activation="relu", normalization="group_norm_single", skip=True
                )
            )
        context_kernels = range(2, 14)
    else:
        context_kernels = [3] * 9
    for kernel in context_kernels:
        layers.append(ConvLayerSpec(channels, channels, kernel, 1, activation="relu", padding="same", skip=True))
    return ConvStackConfig(f"w2v_{variant}", tuple(layers), channels, f"wav2vec {variant}")


def init_weights(cfg: ConvStackConfig, seed: int = 0) -> WeightArchive:
    """Deterministic random weights for ``cfg``.

    Full layers draw from U(-sqrt(3/fan_in), sqrt(3/fan_in)), i.e. variance
    1/fan_in. Shared low-pass layers start as Hanning bumps of increasing width
    (nonnegative, unit sum). Biases start at zero, norm gains at one.
    """
    rng = np.random.default_rng(seed)
    archive = WeightArchive()
    for i, layer in enumerate(cfg.layers):
        if layer.sharing == "per_channel_shared":
            weight = _lowpass_bank(layer.num_shared, layer.kernel)[:, None, :]
        else:
            fan_in = layer.in_channels * layer.kernel
            bound = np.sqrt(3.0 / fan_in)
            weight = rng.uniform(-bound, bound, size=layer.weight_shape)
        archive.add(cfg.tensor_name(i), weight)
        if layer.bias:
            archive.add(cfg.tensor_name(i, "bias"), np.zeros(layer.bias_shape))
        if layer.norm_shape is not None:
            archive.add(cfg.tensor_name(i, "norm.weight"), np.ones(layer.norm_shape))
            archive.add(cfg.tensor_name(i, "norm.bias"), np.zeros(layer.norm_shape))
    return archive


def _lowpass_bank(n: int, kernel: int) -> np.ndarray:
    """``n`` centered Hanning low-passes with widths spread up to ``kernel``."""
    bank = np.zeros((n, kernel))
    for j in range(n):
        width = max(1, int(round(kernel * (j + 1) / n)))
        # drop the zero endpoints so every tap in the support is positive
        taps = dsp.hanning_window(width + 2)[1:-1]
        start = (kernel - width) // 2
        bank[j, start : start + width] = taps
    return bank / bank.sum(axis=1, keepdims=True)


def check_weights(cfg: ConvStackConfig, weights) -> None:
    """Raise ShapeMismatchError unless ``weights`` has every tensor ``cfg`` needs."""
    for name, shape in cfg.expected_tensors().items():
        if name not in weights:
            if ".norm." in name:
                continue  # norm affine parameters are optional
            raise ShapeMismatchError(f"missing tensor {name!r} (expected shape {shape})")
        actual = tuple(np.shape(weights[name]))
        if actual != tuple(shape):
            raise ShapeMismatchError(f"tensor {name!r}: expected shape {tuple(shape)}, got {actual}")


def output_length(cfg: ConvStackConfig, num_samples: int) -> int:
    length = num_samples
    for layer in cfg.layers:
        length = layer.output_length(length)
    return length


def min_input_length(cfg: ConvStackConfig) -> int:
    """Shortest input yielding one frame (the valid-padding receptive field)."""
    need = 1
    for layer in reversed(cfg.layers):
        if layer.padding == "valid":
            need = (need - 1) * layer.stride + layer.kernel
        else:
            need = (need - 1) * layer.stride + 1
    return need


def _group_norm_single(x: np.ndarray) -> np.ndarray:
    # one group: statistics over all channels and time steps of the layer
    return (x - x.mean()) / np.sqrt(x.var() + NORM_EPS)


def apply_layer(layer: ConvLayerSpec, index: int, cfg: ConvStackConfig, weights, x: np.ndarray) -> np.ndarray:
    """One layer of ``cfg`` (0-based ``index``) on channel-major activations ``x``."""
    w = np.asarray(weights[cfg.tensor_name(index)], dtype=np.float64)
    b = weights.get(cfg.tensor_name(index, "bias")) if layer.bias else None
    if layer.sharing == "per_channel_shared":
        # output channel j*N + n is shared kernel n applied to input channel j
        kernels = np.tile(w, (layer.in_channels, 1, 1))
        bias = None if b is None else np.tile(np.asarray(b, dtype=np.float64), layer.in_channels)
        y = dsp.fir_conv1d(x, kernels, layer.stride, layer.padding, bias, groups=layer.in_channels)
    else:
        y = dsp.fir_conv1d(x, w, layer.stride, layer.padding, b)

    gain = weights.get(cfg.tensor_name(index, "norm.weight"))
    shift = weights.get(cfg.tensor_name(index, "norm.bias"))
    if layer.normalization == "group_norm_single":
        y = _group_norm_single(y)
        if gain is not None:
            y = y * np.asarray(gain, dtype=np.float64)[:, None]
        if shift is not None:
            y = y + np.asarray(shift, dtype=np.float64)[:, None]

    if layer.activation == "relu":
        y = np.maximum(y, 0.0)
    elif layer.activation == "abs":
        y = np.abs(y)

    if layer.compression is not None:
        y = dsp.root_compress(y, layer.compression)

    if layer.normalization == "layer_norm":
        y = dsp.layer_norm(y.T, NORM_EPS, gain, shift).T

    if layer.skip:
        y = y + x
    return y


def forward(cfg: ConvStackConfig, weights, w: Waveform, return_all: bool = False):
    """Run the stack over a waveform and return a T x F FeatureMatrix.

    With ``return_all`` the list of per-layer channel-major activations is
    returned as well.
    """
    check_weights(cfg, weights)
    need = min_input_length(cfg)
    if w.num_samples < need:
        raise InputTooShortError(
            f"{cfg.name} needs at least {need} samples ({need / w.sample_rate * 1000:.1f} ms), got {w.num_samples}"
        )
    x = w.samples[None, :]
    activations = []
    for i, layer in enumerate(cfg.layers):
        x = apply_layer(layer, i, cfg, weights, x)
        activations.append(x)
    fm = FeatureMatrix(x.T, frame_shift_samples=int(np.prod([l.stride for l in cfg.layers])))
    if return_all:
        return fm, activations
    return fm


class ConvFrontEnd:
    """A config bound to a fixed weight set; callable on waveforms."""

    def __init__(self, cfg: ConvStackConfig, weights):
        check_weights(cfg, weights)
        self.cfg = cfg
        self.weights = weights

    @classmethod
    def random(cls, cfg: ConvStackConfig, seed: int = 0) -> "ConvFrontEnd":
        return cls(cfg, init_weights(cfg, seed))

    def __call__(self, w: Waveform) -> FeatureMatrix:
        return forward(self.cfg, self.weights, w)


FRONT_END_TYPES = ("gt", "sc", "w2v-regular", "w2v-large")


def build_config(feature_type: str) -> ConvStackConfig:
    """Conv-stack config for ``sc``, ``w2v-regular`` or ``w2v-large``."""
    if feature_type == "sc":
        return build_sc_config()
    if feature_type.startswith("w2v-"):
        return build_w2v_config(feature_type[4:])
    raise ValidationError(f"{feature_type!r} is not a conv-stack front-end")
