"""File formats: WAV input, the WFE1 tensor archive, and feature files.

WFE1 layout (all integers little-endian u32)::

    b"WFE1" | entry count | per entry: name length, UTF-8 name,
    ndim, ndim dims, prod(dims) float32 values (row-major)

Feature file ``raw_f32`` layout: u32 T, u32 F, u32 frame shift, then T*F
little-endian float32 values row-major. ``text`` is one frame per line.
"""

from __future__ import annotations

import os
import struct
import wave
from collections.abc import Iterator, Mapping
from pathlib import Path

import numpy as np

from .dsp import SAMPLE_RATE, FeatureMatrix, Waveform
from .errors import (
    BadMagicError,
    DuplicateNameError,
    FeatureFileError,
    TruncatedArchiveError,
    UnsupportedFormatError,
    ValidationError,
)

MAGIC = b"WFE1"
_U32 = struct.Struct("<I")
_F32 = np.dtype("<f4")

FEATURE_FORMATS = ("raw_f32", "text")


# --------------------------------------------------------------------- audio


def read_wav(path) -> Waveform:
    """Read a 16-bit PCM mono 16 kHz WAV file, scaling samples by 1/32768.

    Anything else is rejected; there is no resampling or downmixing.
    """
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as wf:
            channels = wf.getnchannels()
            width = wf.getsampwidth()
            rate = wf.getframerate()
            comptype = wf.getcomptype()
            raw = wf.readframes(wf.getnframes())
    except wave.Error as exc:
        raise UnsupportedFormatError(f"{path}: not a PCM WAV file ({exc})") from exc
    except EOFError as exc:
        raise UnsupportedFormatError(f"{path}: truncated WAV file") from exc
    problems = []
    if comptype != "NONE":
        problems.append(f"compression {comptype}")
    if channels != 1:
        problems.append(f"{channels} channels (need mono)")
    if width != 2:
        problems.append(f"{8 * width}-bit samples (need 16-bit)")
    if rate != SAMPLE_RATE:
        problems.append(f"{rate} Hz (need {SAMPLE_RATE} Hz)")
    if problems:
        raise UnsupportedFormatError(f"{path}: unsupported audio format: " + ", ".join(problems))
    pcm = np.frombuffer(raw, dtype="<i2")
    if pcm.size == 0:
        raise UnsupportedFormatError(f"{path}: WAV file contains no samples")
    return Waveform(pcm.astype(np.float64) / 32768.0)


def write_wav(path, w: Waveform) -> None:
    """Write a waveform as 16-bit PCM; values are rounded and clipped."""
    pcm = np.clip(np.round(w.samples * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(w.sample_rate)
        wf.writeframes(pcm.tobytes())


# ------------------------------------------------------------ weight archive


class WeightArchive(Mapping):
    """Ordered, name-unique collection of float32 tensors.

    Tensors are stored as float32 on insertion, so what you read back from
    the archive is exactly what gets written to disk.
    """

    def __init__(self, entries=None):
        self._tensors: dict[str, np.ndarray] = {}
        if entries is not None:
            items = entries.items() if isinstance(entries, Mapping) else entries
            for name, array in items:
                self.add(name, array)

    def add(self, name: str, array) -> None:
        if not isinstance(name, str) or not name:
            raise ValidationError("tensor names must be non-empty strings")
        if name in self._tensors:
            raise DuplicateNameError(f"duplicate tensor name {name!r}")
        arr = np.array(array, dtype=_F32)
        arr.flags.writeable = False
        self._tensors[name] = arr

    def __getitem__(self, name: str) -> np.ndarray:
        return self._tensors[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def __repr__(self):
        body = ", ".join(f"{k}{tuple(v.shape)}" for k, v in self._tensors.items())
        return f"WeightArchive({body})"

    def num_elements(self) -> int:
        return int(sum(t.size for t in self._tensors.values()))

    def merged(self, other: "WeightArchive") -> "WeightArchive":
        return WeightArchive(list(self.items()) + list(other.items()))

    def to_bytes(self) -> bytes:
        parts = [MAGIC, _U32.pack(len(self._tensors))]
        for name, arr in self._tensors.items():
            encoded = name.encode("utf-8")
            parts.append(_U32.pack(len(encoded)))
            parts.append(encoded)
            parts.append(_U32.pack(arr.ndim))
            parts.extend(_U32.pack(d) for d in arr.shape)
            parts.append(np.ascontiguousarray(arr, dtype=_F32).tobytes())
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "WeightArchive":
        buf = memoryview(data)
        if len(buf) < 4 or bytes(buf[:4]) != MAGIC:
            raise BadMagicError(f"bad magic {bytes(buf[:4])!r}, expected {MAGIC!r}")
        pos = 4

        def take(n, what):
            nonlocal pos
            if pos + n > len(buf):
                raise TruncatedArchiveError(f"archive truncated while reading {what}")
            chunk = buf[pos : pos + n]
            pos += n
            return chunk

        (count,) = _U32.unpack(take(4, "entry count"))
        archive = cls()
        for index in range(count):
            (name_len,) = _U32.unpack(take(4, f"name length of entry {index}"))
            try:
                name = bytes(take(name_len, f"name of entry {index}")).decode("utf-8")
            except UnicodeDecodeError as exc:
                raise BadMagicError(f"entry {index} has a name that is not valid UTF-8") from exc
            (ndim,) = _U32.unpack(take(4, f"ndim of {name!r}"))
            dims = [_U32.unpack(take(4, f"shape of {name!r}"))[0] for _ in range(ndim)]
            size = int(np.prod(dims, dtype=np.int64))
            payload = take(4 * size, f"payload of {name!r}")
            if name in archive:
                raise DuplicateNameError(f"duplicate tensor name {name!r} in archive")
            archive.add(name, np.frombuffer(payload, dtype=_F32).reshape(dims))
        if pos != len(buf):
            raise TruncatedArchiveError(f"{len(buf) - pos} unexpected trailing bytes after {count} entries")
        return archive

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "WeightArchive":
        return cls.from_bytes(Path(path).read_bytes())


def write_archive(archive: WeightArchive, path) -> None:
    archive.save(path)


def read_archive(path) -> WeightArchive:
    return WeightArchive.load(path)


# ------------------------------------------------------------- feature files


def features_to_bytes(fm: FeatureMatrix) -> bytes:
    header = struct.pack("<III", fm.num_frames, fm.dim, fm.frame_shift_samples)
    return header + np.ascontiguousarray(fm.values, dtype=_F32).tobytes()


def features_from_bytes(data: bytes, source="<bytes>") -> FeatureMatrix:
    if len(data) < 12:
        raise FeatureFileError(f"{source}: feature file shorter than its 12-byte header")
    t, f, shift = struct.unpack_from("<III", data, 0)
    expected = 12 + 4 * t * f
    if len(data) != expected:
        raise FeatureFileError(f"{source}: header says {t}x{f} ({expected} bytes), file has {len(data)} bytes")
    values = np.frombuffer(data, dtype=_F32, offset=12).reshape(t, f)
    try:
        return FeatureMatrix(values.astype(np.float64), shift)
    except ValidationError as exc:
        raise FeatureFileError(f"{source}: {exc}") from exc


def write_features(fm: FeatureMatrix, path, format: str = "raw_f32") -> None:
    """Write features as ``raw_f32`` (binary with header) or ``text``."""
    if format not in FEATURE_FORMATS:
        raise ValidationError(f"unknown feature format {format!r}; choose from {FEATURE_FORMATS}")
    try:
        if format == "raw_f32":
            Path(path).write_bytes(features_to_bytes(fm))
        else:
            values = fm.values.astype(_F32)
            with open(path, "w", encoding="ascii") as fh:
                for row in values:
                    # 9 significant digits round-trip any float32 exactly
                    fh.write(" ".join(f"{v:.9g}" for v in row))
                    fh.write("\n")
    except OSError as exc:
        raise FeatureFileError(f"{path}: cannot write features ({exc.strerror or exc})") from exc


def read_features(path, format: str = "raw_f32", frame_shift_samples: int = 160) -> FeatureMatrix:
    """Read a feature file. Text files carry no header, so the shift is passed in."""
    if format not in FEATURE_FORMATS:
        raise ValidationError(f"unknown feature format {format!r}; choose from {FEATURE_FORMATS}")
    try:
        if format == "raw_f32":
            return features_from_bytes(Path(path).read_bytes(), source=path)
        with open(path, encoding="ascii") as fh:
            rows = [line.split() for line in fh if line.strip()]
    except OSError as exc:
        raise FeatureFileError(f"{path}: cannot read features ({exc.strerror or exc})") from exc
    if not rows or len({len(r) for r in rows}) != 1:
        raise FeatureFileError(f"{path}: text features must have equal, non-zero column counts")
    try:
        values = np.array(rows, dtype=_F32).astype(np.float64)
        return FeatureMatrix(values, frame_shift_samples)
    except (ValueError, ValidationError) as exc:
        raise FeatureFileError(f"{path}: {exc}") from exc


def remove_quietly(path) -> None:
    try:
        os.remove(path)
    except FileNotFoundError:
        pass
