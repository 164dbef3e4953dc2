"""Frame-wise feature concatenation and waveform chunking."""

from __future__ import annotations

import math
import warnings
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from .dsp import SAMPLE_RATE, FeatureMatrix, Waveform
from .errors import ChunkTooShortError, ValidationError


def concat_features(streams: Sequence[FeatureMatrix], truncate: bool = False) -> FeatureMatrix:
    """Concatenate streams channel-wise, frame by frame, in the given order.

    All streams must share the frame shift. Unequal frame counts are an error
    unless ``truncate`` is set, in which case every stream is cut to the
    shortest one and a warning is issued.
    """
    streams = list(streams)
    if not streams:
        raise ValidationError("need at least one feature stream")
    shifts = {s.frame_shift_samples for s in streams}
    if len(shifts) != 1:
        listing = ", ".join(f"#{i}: {s.frame_shift_samples}" for i, s in enumerate(streams))
        raise ValidationError(f"feature streams have different frame shifts ({listing})")
    lengths = [s.num_frames for s in streams]
    if len(set(lengths)) != 1:
        listing = ", ".join(f"#{i}: T={t}" for i, t in enumerate(lengths))
        if not truncate:
            raise ValidationError(f"feature streams have different frame counts ({listing})")
        warnings.warn(f"truncating feature streams to {min(lengths)} frames ({listing})", stacklevel=2)
    t = min(lengths)
    values = np.concatenate([s.values[:t] for s in streams], axis=1)
    return FeatureMatrix(values, shifts.pop())


def split_features(fm: FeatureMatrix, dims: Sequence[int]) -> list[FeatureMatrix]:
    """Inverse of concat_features: cut the channels into blocks of ``dims``."""
    if sum(dims) != fm.dim:
        raise ValidationError(f"block sizes {list(dims)} sum to {sum(dims)}, features have {fm.dim} channels")
    edges = np.cumsum([0, *dims])
    return [FeatureMatrix(fm.values[:, a:b], fm.frame_shift_samples) for a, b in zip(edges[:-1], edges[1:])]


@dataclass(frozen=True)
class ChunkingConfig:
    chunk_size: int
    chunk_shift: int
    pad_final: bool = False

    def __post_init__(self):
        if not 0 < self.chunk_shift <= self.chunk_size:
            raise ValidationError(
                f"need 0 < chunk_shift <= chunk_size, got shift={self.chunk_shift}, size={self.chunk_size}"
            )

    @classmethod
    def from_seconds(cls, size_s: float, shift_s: float, pad_final: bool = False, sample_rate: int = SAMPLE_RATE):
        return cls(int(round(size_s * sample_rate)), int(round(shift_s * sample_rate)), pad_final)


def chunk_offsets(num_samples: int, cfg: ChunkingConfig) -> list[int]:
    """Start offsets; the last chunk is the first one reaching the end of the signal."""
    if num_samples < 1:
        raise ValidationError("need at least one sample")
    offsets = [0]
    while offsets[-1] + cfg.chunk_size < num_samples:
        offsets.append(offsets[-1] + cfg.chunk_shift)
    return offsets


def chunk_waveform(w: Waveform, cfg: ChunkingConfig) -> list[Waveform]:
    """Overlapping chunks covering every sample; see chunk_offsets for placement."""
    chunks = []
    for start in chunk_offsets(w.num_samples, cfg):
        piece = w.samples[start : start + cfg.chunk_size]
        if cfg.pad_final and piece.size < cfg.chunk_size:
            piece = np.pad(piece, (0, cfg.chunk_size - piece.size))
        chunks.append(Waveform(piece, w.sample_rate))
    return chunks


def frames_for_chunk(
    chunk_offset: int,
    chunk_len: int,
    frame_shift: int,
    receptive_field: int,
    lead: int = 0,
) -> range:
    """Global frame indices whose whole receptive field lies inside the chunk.

    Frame ``t`` sees samples ``[t*shift - lead, t*shift - lead + receptive_field)``.
    """
    if chunk_len < receptive_field:
        raise ChunkTooShortError(
            f"chunk of {chunk_len} samples ({chunk_len / SAMPLE_RATE:.3f} s) is shorter than the "
            f"receptive field of {receptive_field} samples ({receptive_field / SAMPLE_RATE * 1000:.1f} ms)"
        )
    first = math.ceil((chunk_offset + lead) / frame_shift)
    last = (chunk_offset + chunk_len - receptive_field + lead) // frame_shift
    return range(first, last + 1)


def stitched_extract(
    w: Waveform,
    extract: Callable[[Waveform], FeatureMatrix],
    cfg: ChunkingConfig,
    num_frames: int,
    receptive_field: int,
    lead: int = 0,
) -> FeatureMatrix:
    """Extract chunk by chunk and reassemble ``num_frames`` utterance-level frames.

    Each global frame is taken from the first chunk that sees its whole
    receptive field; frames at the utterance edges may also come from the
    first and last chunk. Normalization inside ``extract`` then acts per chunk.
    """
    shift = None
    rows: dict[int, np.ndarray] = {}
    offsets = chunk_offsets(w.num_samples, cfg)
    chunks = chunk_waveform(w, ChunkingConfig(cfg.chunk_size, cfg.chunk_shift, pad_final=False))
    last = len(chunks) - 1
    for i, (offset, chunk) in enumerate(zip(offsets, chunks)):
        if i == last and i > 0 and chunk.num_samples < receptive_field:
            break  # a short tail chunk holds no complete frame; earlier chunks cover it
        if chunk.num_samples < receptive_field:
            frames_for_chunk(offset, chunk.num_samples, 1, receptive_field, lead)  # raises
        fm = extract(chunk)
        shift = fm.frame_shift_samples
        if offset % shift:
            raise ValidationError(f"chunk shift must be a multiple of the frame shift {shift}")
        base = offset // shift
        inside = frames_for_chunk(offset, chunk.num_samples, shift, receptive_field, lead)
        lo = base if i == 0 else inside.start
        hi = base + fm.num_frames if i == last else inside.stop
        for t in range(max(lo, base), min(hi, base + fm.num_frames)):
            rows.setdefault(t, fm.values[t - base])
    missing = [t for t in range(num_frames) if t not in rows]
    if missing:
        raise ChunkTooShortError(
            f"{len(missing)} frames (first: {missing[0]}) are not fully inside any chunk; "
            "increase the chunk overlap"
        )
    return FeatureMatrix(np.stack([rows[t] for t in range(num_frames)]), shift)
