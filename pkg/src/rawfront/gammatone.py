"""FIR Gammatone filterbank and the Gammatone feature pipeline.

Pipeline: pre-emphasis, 50 Gammatone FIR filters (640 taps), magnitude,
Hanning-weighted temporal integration (25 ms window, 10 ms shift), 10th
root, DCT, per-channel standardization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import dsp
from .dsp import SAMPLE_RATE, FeatureMatrix, Waveform
from .errors import InputTooShortError, ValidationError
from .io import WeightArchive

# human cochlea
GREENWOOD_A = 165.4
GREENWOOD_ALPHA = 2.1
GREENWOOD_K = 0.88


@dataclass(frozen=True)
class GammatoneConfig:
    num_filters: int = 50
    filter_length: int = 640
    f_min: float = 100.0
    f_max: float = 7500.0
    order: int = 4
    window_width: int = 400
    window_shift: int = 160
    compression_exponent: float = 0.1
    num_dct_coeffs: int | None = None
    pre_emphasis_alpha: float = 1.0
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        if self.num_dct_coeffs is None:
            object.__setattr__(self, "num_dct_coeffs", self.num_filters)
        if self.num_filters < 1:
            raise ValidationError("num_filters must be >= 1")
        if not 0 < self.f_min < self.f_max <= self.sample_rate / 2:
            raise ValidationError(
                f"need 0 < f_min < f_max <= {self.sample_rate / 2}, got {self.f_min}, {self.f_max}"
            )
        if self.filter_length < 2:
            raise ValidationError("filter_length must be >= 2")
        if self.window_width < 2:
            raise ValidationError("window_width must be >= 2")
        if not 1 <= self.window_shift <= self.window_width:
            raise ValidationError("window_shift must lie in [1, window_width]")
        if not 1 <= self.num_dct_coeffs <= self.num_filters:
            raise ValidationError("num_dct_coeffs must lie in [1, num_filters]")
        if self.order < 1:
            raise ValidationError("order must be >= 1")

    @property
    def receptive_field(self) -> int:
        """Samples seen by one frame through filtering and integration."""
        return self.filter_length + self.window_width - 1

    @property
    def min_samples(self) -> int:
        return self.receptive_field

    def num_frames(self, num_samples: int) -> int:
        conv_len = num_samples - self.filter_length + 1
        if conv_len < self.window_width:
            return 0
        return (conv_len - self.window_width) // self.window_shift + 1


def greenwood(x, A=GREENWOOD_A, alpha=GREENWOOD_ALPHA, k=GREENWOOD_K):
    """Cochlear position (0..1-ish) to frequency in Hz."""
    return A * (10.0 ** (alpha * np.asarray(x, dtype=np.float64)) - k)


def greenwood_inverse(f, A=GREENWOOD_A, alpha=GREENWOOD_ALPHA, k=GREENWOOD_K):
    return np.log10(np.asarray(f, dtype=np.float64) / A + k) / alpha


def greenwood_center_frequencies(n: int, f_min: float = 100.0, f_max: float = 7500.0) -> np.ndarray:
    """``n`` center frequencies equally spaced in cochlear position."""
    if n < 1:
        raise ValidationError("need at least one center frequency")
    if f_min <= 0 or f_max <= f_min:
        raise ValidationError(f"need 0 < f_min < f_max, got f_min={f_min}, f_max={f_max}")
    if n == 1:
        return np.array([f_min], dtype=np.float64)
    x = np.linspace(greenwood_inverse(f_min), greenwood_inverse(f_max), n)
    freqs = greenwood(x)
    # pin the endpoints exactly against round-off in the log/exp round trip
    freqs[0], freqs[-1] = f_min, f_max
    return freqs


def erb(f):
    """Equivalent rectangular bandwidth in Hz (Glasberg and Moore)."""
    return 24.7 * (4.37 * np.asarray(f, dtype=np.float64) / 1000.0 + 1.0)


def dtft(h: np.ndarray, freq: float, sample_rate: int = SAMPLE_RATE) -> complex:
    n = np.arange(len(h))
    return complex(np.sum(h * np.exp(-2j * np.pi * freq * n / sample_rate)))


def gammatone_impulse_response(
    fc: float, order: int = 4, length: int = 640, sample_rate: int = SAMPLE_RATE
) -> np.ndarray:
    """Sampled Gammatone impulse response with unit gain at ``fc``."""
    if not 0 < fc < sample_rate / 2:
        raise ValidationError(f"center frequency {fc} Hz must lie in (0, {sample_rate / 2})")
    if order < 1:
        raise ValidationError("order must be >= 1")
    if length < 2:
        raise ValidationError("length must be >= 2")
    t = np.arange(length) / sample_rate
    b = 1.019 * erb(fc)
    g = t ** (order - 1) * np.exp(-2.0 * np.pi * b * t) * np.cos(2.0 * np.pi * fc * t)
    return g / abs(dtft(g, fc, sample_rate))


def gammatone_filterbank(cfg: GammatoneConfig = GammatoneConfig()) -> np.ndarray:
    """``(num_filters, 1, filter_length)`` kernel tensor, low to high frequency."""
    freqs = greenwood_center_frequencies(cfg.num_filters, cfg.f_min, cfg.f_max)
    bank = np.stack(
        [gammatone_impulse_response(f, cfg.order, cfg.filter_length, cfg.sample_rate) for f in freqs]
    )
    return bank[:, None, :]


class GammatoneExtractor:
    """Immutable Gammatone feature extractor; the filterbank is built once."""

    def __init__(self, cfg: GammatoneConfig | None = None, norm_stats=None):
        self.cfg = cfg or GammatoneConfig()
        self.norm_stats = norm_stats

    @cached_property
    def filters(self) -> np.ndarray:
        bank = gammatone_filterbank(self.cfg)
        bank.flags.writeable = False
        return bank

    @cached_property
    def center_frequencies(self) -> np.ndarray:
        return greenwood_center_frequencies(self.cfg.num_filters, self.cfg.f_min, self.cfg.f_max)

    @cached_property
    def window(self) -> np.ndarray:
        win = dsp.hanning_window(self.cfg.window_width)
        win = win / win.sum()
        win.flags.writeable = False
        return win

    def _check_length(self, w: Waveform, min_samples: int) -> None:
        if w.num_samples < min_samples:
            raise InputTooShortError(
                f"Gammatone features need at least {min_samples} samples "
                f"({min_samples / self.cfg.sample_rate * 1000:.1f} ms), got {w.num_samples}"
            )

    def envelopes(self, w: Waveform) -> np.ndarray:
        """Compressed band envelopes, T x num_filters, before DCT."""
        cfg = self.cfg
        self._check_length(w, cfg.min_samples)
        emphasized = dsp.pre_emphasis(w, cfg.pre_emphasis_alpha)
        bands = np.abs(dsp.fir_conv1d(emphasized.samples, self.filters, stride=1))
        # same window for every band: a grouped convolution with one group per band
        kernels = np.broadcast_to(self.window, (cfg.num_filters, 1, cfg.window_width))
        integrated = dsp.fir_conv1d(bands, kernels, stride=cfg.window_shift, groups=cfg.num_filters)
        return dsp.root_compress(integrated.T, cfg.compression_exponent)

    def cepstra(self, w: Waveform) -> np.ndarray:
        return dsp.dct2(self.envelopes(w), self.cfg.num_dct_coeffs)

    def __call__(self, w: Waveform, norm_stats=None) -> FeatureMatrix:
        stats = norm_stats if norm_stats is not None else self.norm_stats
        if stats is None:
            # utterance statistics need two frames
            self._check_length(w, self.cfg.min_samples + self.cfg.window_shift)
        feats = dsp.channel_standardize(self.cepstra(w), stats)
        return FeatureMatrix(feats, self.cfg.window_shift)

    def to_archive(self, prefix: str = "gt") -> WeightArchive:
        """Fixed parameters as named tensors (filters, window, normalization stats)."""
        archive = WeightArchive()
        archive.add(f"{prefix}.filters", self.filters)
        archive.add(f"{prefix}.window", self.window)
        if self.norm_stats is not None:
            archive.add(f"{prefix}.norm.mean", np.asarray(self.norm_stats[0]))
            archive.add(f"{prefix}.norm.var", np.asarray(self.norm_stats[1]))
        return archive


def extract_gammatone(w: Waveform, cfg: GammatoneConfig | None = None, norm_stats=None) -> FeatureMatrix:
    return GammatoneExtractor(cfg)(w, norm_stats)


def filter_peak_frequencies(filters: np.ndarray, sample_rate: int = SAMPLE_RATE, resolution_hz: float = 0.25):
    """Frequency of maximum magnitude response for each filter, via zero-padded FFT."""
    taps = np.asarray(filters, dtype=np.float64).reshape(len(filters), -1)
    nfft = int(math.ceil(sample_rate / resolution_hz))
    spectrum = np.abs(np.fft.rfft(taps, n=nfft, axis=1))
    return np.argmax(spectrum, axis=1) * sample_rate / nfft
