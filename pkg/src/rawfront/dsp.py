"""Signal-processing primitives shared by every front-end.

All arithmetic is float64. Functions are pure and never modify their inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import fftconvolve

from .errors import EmptyOutputError, ValidationError

SAMPLE_RATE = 16000
# kernels at least this long go through the FFT when stride is 1
FFT_MIN_KERNEL = 128


@dataclass(frozen=True)
class Waveform:
    """Mono waveform at 16 kHz with samples scaled to [-1, 1]."""

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        samples = np.array(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValidationError(f"waveform must be 1-D, got shape {samples.shape}")
        if samples.size < 1:
            raise ValidationError("waveform must contain at least one sample")
        if self.sample_rate != SAMPLE_RATE:
            raise ValidationError(f"sample rate must be {SAMPLE_RATE} Hz, got {self.sample_rate}")
        if not np.all(np.isfinite(samples)):
            raise ValidationError("waveform contains non-finite samples")
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)

    @property
    def num_samples(self) -> int:
        return int(self.samples.size)

    def __len__(self):
        return self.num_samples

    @property
    def duration(self) -> float:
        return self.num_samples / self.sample_rate


@dataclass(frozen=True)
class FeatureMatrix:
    """T frames by F channels, one frame every ``frame_shift_samples``."""

    values: np.ndarray
    frame_shift_samples: int = 160
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValidationError(f"feature matrix must be 2-D, got shape {values.shape}")
        if values.shape[0] < 1 or values.shape[1] < 1:
            raise ValidationError(f"feature matrix must be non-empty, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValidationError("feature matrix contains non-finite values")
        if int(self.frame_shift_samples) < 1:
            raise ValidationError("frame_shift_samples must be >= 1")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "frame_shift_samples", int(self.frame_shift_samples))

    @property
    def num_frames(self) -> int:
        return int(self.values.shape[0])

    @property
    def dim(self) -> int:
        return int(self.values.shape[1])

    # short aliases matching the usual T x F notation
    T = num_frames
    F = dim


def conv_output_length(length: int, kernel: int, stride: int = 1, padding: str = "valid") -> int:
    """Number of output samples of a 1-D convolution."""
    if padding == "valid":
        if length < kernel:
            return 0
        return (length - kernel) // stride + 1
    if padding == "same":
        return -(-length // stride)
    raise ValidationError(f"unknown padding mode {padding!r}")


def same_padding(length: int, kernel: int, stride: int = 1) -> tuple[int, int]:
    """(left, right) zero padding giving ceil(length / stride) outputs."""
    out = -(-length // stride)
    total = max((out - 1) * stride + kernel - length, 0)
    left = total // 2
    return left, total - left


def fir_conv1d(
    signal: np.ndarray,
    kernels: np.ndarray,
    stride: int = 1,
    padding: str = "valid",
    bias: np.ndarray | None = None,
    groups: int = 1,
) -> np.ndarray:
    """Multi-channel strided FIR filtering (cross-correlation, no kernel flip).

    ``signal`` is channel-major ``(C_in, L)`` (a 1-D array is treated as one
    channel) and ``kernels`` is ``(C_out, C_in // groups, K)``. Output
    ``(C_out, L')`` with ``out[c, t] = sum_{i,k} kernels[c, i, k] *
    signal[i, t*stride + k - offset]`` where ``offset`` is the left padding.
    With ``groups > 1`` the channels are split into independent blocks as in
    grouped convolution.
    """
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    w = np.asarray(kernels, dtype=np.float64)
    if w.ndim != 3:
        raise ValidationError(f"kernels must be (C_out, C_in/groups, K), got shape {w.shape}")
    if not np.all(np.isfinite(w)):
        raise ValidationError("kernels contain non-finite values")
    stride = int(stride)
    if stride < 1:
        raise ValidationError("stride must be >= 1")
    c_in, length = x.shape
    c_out, c_per_group, k = w.shape
    if k < 1:
        raise ValidationError("kernel length must be >= 1")
    if groups < 1 or c_in % groups or c_out % groups:
        raise ValidationError(f"groups={groups} must divide C_in={c_in} and C_out={c_out}")
    if c_per_group != c_in // groups:
        raise ValidationError(
            f"kernels expect {c_per_group} input channels per group, signal provides {c_in // groups}"
        )

    if padding == "same":
        left, right = same_padding(length, k, stride)
        x = np.pad(x, ((0, 0), (left, right)))
    elif padding != "valid":
        raise ValidationError(f"unknown padding mode {padding!r}")
    if x.shape[1] < k:
        raise EmptyOutputError(f"signal length {length} is shorter than kernel length {k}")

    g_in = c_in // groups
    g_out = c_out // groups
    if g_in == 1 and stride == 1 and k >= FFT_MIN_KERNEL:
        # long unstrided filters on one input channel each: FFT correlation
        source = np.repeat(x, g_out, axis=0)
        out = fftconvolve(source, w[:, 0, ::-1], mode="valid", axes=1)
        if bias is not None:
            out = out + np.asarray(bias, dtype=np.float64).reshape(c_out, 1)
        return out

    # (C_in, L', K) view without copying, then one batched matmul per group
    windows = sliding_window_view(x, k, axis=1)[:, ::stride, :]
    n_out = windows.shape[1]
    win = windows.reshape(groups, g_in, n_out, k).transpose(0, 2, 1, 3).reshape(groups, n_out, g_in * k)
    ker = w.reshape(groups, g_out, g_in * k).transpose(0, 2, 1)
    out = np.matmul(win, ker).transpose(0, 2, 1).reshape(c_out, n_out)
    if bias is not None:
        out = out + np.asarray(bias, dtype=np.float64).reshape(c_out, 1)
    return out


def pre_emphasis(w: Waveform, alpha: float = 1.0) -> Waveform:
    """First-order pre-emphasis ``y[t] = x[t] - alpha * x[t-1]``, ``y[0] = x[0]``."""
    if not 0.0 <= alpha <= 1.0:
        raise ValidationError(f"pre-emphasis alpha must lie in [0, 1], got {alpha}")
    x = w.samples
    y = x.copy()
    y[1:] = x[1:] - alpha * x[:-1]
    return Waveform(y, w.sample_rate)


def hanning_window(width: int) -> np.ndarray:
    """Symmetric Hanning window with zero endpoints."""
    width = int(width)
    if width < 2:
        raise ValidationError(f"window width must be >= 2, got {width}")
    n = np.arange(width)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * n / (width - 1)))


def dct_matrix(size: int, num_coeffs: int | None = None, orthonormal: bool = True) -> np.ndarray:
    """DCT-II matrix of shape ``(num_coeffs, size)``."""
    if size < 1:
        raise ValidationError("DCT size must be >= 1")
    if num_coeffs is None:
        num_coeffs = size
    if not 1 <= num_coeffs <= size:
        raise ValidationError(f"num_coeffs must lie in [1, {size}], got {num_coeffs}")
    k = np.arange(num_coeffs)[:, None]
    n = np.arange(size)[None, :]
    mat = np.cos(np.pi * k * (n + 0.5) / size)
    if orthonormal:
        mat[0] *= math.sqrt(1.0 / size)
        mat[1:] *= math.sqrt(2.0 / size)
    return mat


def dct2(x: np.ndarray, num_coeffs: int | None = None, orthonormal: bool = True) -> np.ndarray:
    """DCT-II along the last axis, keeping the first ``num_coeffs`` coefficients."""
    x = np.asarray(x, dtype=np.float64)
    size = x.shape[-1]
    if num_coeffs is not None and num_coeffs > size:
        raise ValidationError(f"num_coeffs={num_coeffs} exceeds input dimension {size}")
    return x @ dct_matrix(size, num_coeffs, orthonormal).T


def root_compress(x: np.ndarray, exponent: float = 0.1) -> np.ndarray:
    """Elementwise ``x ** exponent`` for nonnegative ``x``."""
    if not 0.0 < exponent <= 1.0:
        raise ValidationError(f"compression exponent must lie in (0, 1], got {exponent}")
    x = np.asarray(x, dtype=np.float64)
    if np.any(x < 0):
        raise ValidationError("root compression needs nonnegative input; rectify first")
    return np.power(x, exponent)


def layer_norm(frames: np.ndarray, epsilon: float = 1e-5, scale=None, shift=None) -> np.ndarray:
    """Normalize each frame (row) to zero mean and unit population variance."""
    x = np.asarray(frames, dtype=np.float64)
    if x.shape[-1] < 2:
        raise ValidationError("layer_norm needs at least 2 channels per frame")
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    y = (x - mu) / np.sqrt(var + epsilon)
    if scale is not None:
        y = y * np.asarray(scale, dtype=np.float64)
    if shift is not None:
        y = y + np.asarray(shift, dtype=np.float64)
    return y


def channel_standardize(
    frames: np.ndarray,
    stats: tuple[np.ndarray, np.ndarray] | None = None,
    epsilon: float = 1e-5,
) -> np.ndarray:
    """Per-channel (column) mean/variance normalization, i.e. batch norm at inference.

    ``stats`` is ``(mean, variance)`` with one entry per channel, e.g. running
    statistics from training. Without it the utterance's own statistics are
    used, which needs T >= 2.
    """
    x = np.asarray(frames, dtype=np.float64)
    if x.ndim != 2:
        raise ValidationError(f"expected a T x F matrix, got shape {x.shape}")
    if stats is None:
        if x.shape[0] < 2:
            raise ValidationError("utterance statistics need at least 2 frames")
        mean = x.mean(axis=0)
        var = x.var(axis=0)
    else:
        mean = np.asarray(stats[0], dtype=np.float64).reshape(-1)
        var = np.asarray(stats[1], dtype=np.float64).reshape(-1)
        if mean.size != x.shape[1] or var.size != x.shape[1]:
            raise ValidationError(
                f"stats have dimension {mean.size}/{var.size}, features have {x.shape[1]} channels"
            )
        if np.any(var < 0):
            raise ValidationError("variances must be nonnegative")
    # channels with variance below epsilon count as constant and go to zero;
    # dividing them by sqrt(epsilon) instead would leave a variance that a
    # second pass rescales. Not adding epsilon keeps (0, 1) stats an identity.
    flat = var < epsilon
    out = (x - mean) / np.sqrt(np.where(flat, 1.0, var))
    out[:, flat] = 0.0
    return out
