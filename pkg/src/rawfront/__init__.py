"""Raw-waveform speech front-ends.

FIR Gammatone features, supervised-convolutional and wav2vec-style conv
stacks, per-utterance i-vectors, frame-wise combination and chunking, and a
static analyzer for parameter counts and receptive fields.
"""

from .analysis import StackReport, param_count, receptive_field, stack_report, subsampling_factor
from .combine import ChunkingConfig, chunk_waveform, concat_features, frames_for_chunk, split_features
from .convstack import (
    ConvFrontEnd,
    ConvLayerSpec,
    ConvStackConfig,
    build_config,
    build_sc_config,
    build_w2v_config,
    forward,
    init_weights,
)
from .dsp import FeatureMatrix, Waveform
from .gammatone import GammatoneConfig, GammatoneExtractor, extract_gammatone
from .io import WeightArchive, read_features, read_wav, write_features, write_wav
from .ivector import IVector, IVectorModel, extract_ivector, tile_ivector, utterance_ivector

__version__ = "0.1.0"

__all__ = [
    "ChunkingConfig",
    "ConvFrontEnd",
    "ConvLayerSpec",
    "ConvStackConfig",
    "FeatureMatrix",
    "GammatoneConfig",
    "GammatoneExtractor",
    "IVector",
    "IVectorModel",
    "StackReport",
    "Waveform",
    "WeightArchive",
    "build_config",
    "build_sc_config",
    "build_w2v_config",
    "chunk_waveform",
    "concat_features",
    "extract_gammatone",
    "extract_ivector",
    "forward",
    "frames_for_chunk",
    "init_weights",
    "param_count",
    "read_features",
    "read_wav",
    "receptive_field",
    "split_features",
    "stack_report",
    "subsampling_factor",
    "tile_ivector",
    "utterance_ivector",
    "write_features",
    "write_wav",
]
