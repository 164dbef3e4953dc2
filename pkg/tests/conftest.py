import numpy as np
import pytest

from rawfront.dsp import SAMPLE_RATE, Waveform


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def noise(seconds, seed=0, scale=0.1):
    r = np.random.default_rng(seed)
    return Waveform(r.normal(0.0, scale, int(round(seconds * SAMPLE_RATE))))


def tone(seconds, freq=440.0, amplitude=0.5):
    t = np.arange(int(round(seconds * SAMPLE_RATE))) / SAMPLE_RATE
    return Waveform(amplitude * np.sin(2 * np.pi * freq * t))


def naive_conv(signal, kernels, stride, offset=0):
    """Triple loop over output channel, position and (input channel, tap)."""
    c_in, length = signal.shape
    c_out, _, k = kernels.shape
    n_out = (length + 2 * offset - k) // stride + 1 if offset else (length - k) // stride + 1
    out = np.zeros((c_out, n_out))
    for c in range(c_out):
        for t in range(n_out):
            acc = 0.0
            for i in range(c_in):
                for j in range(k):
                    idx = t * stride + j - offset
                    if 0 <= idx < length:
                        acc += kernels[c, i, j] * signal[i, idx]
            out[c, t] = acc
    return out


# criterion number -> (verdict, detail); filled by test_acceptance.py
ACCEPTANCE_RESULTS: dict[int, tuple[str, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        verdict, detail = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"criterion {number}: {verdict}  {detail}")
