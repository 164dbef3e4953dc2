"""Command-line interface: ``rawfront {extract,analyze,combine,ivector,init-weights}``."""

from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

import numpy as np

from . import analysis, convstack
from .combine import ChunkingConfig, concat_features, stitched_extract
from .dsp import SAMPLE_RATE, FeatureMatrix, Waveform
from .errors import RawFrontError
from .gammatone import GammatoneConfig, GammatoneExtractor
from .io import FEATURE_FORMATS, WeightArchive, read_features, read_wav, remove_quietly, write_features
from .ivector import IVectorModel, toy_model, utterance_ivector

FEATURE_TYPES = convstack.FRONT_END_TYPES


class UsageError(Exception):
    pass


def _output_paths(inputs: list[Path], output: Path, suffix: str) -> list[Path]:
    if len(inputs) == 1 and not output.is_dir():
        return [output]
    if not output.is_dir():
        raise UsageError(f"with several inputs the output {output} must be an existing directory")
    return [output / (p.stem + suffix) for p in inputs]


def _front_end(args):
    """(extract callable, frame count function, receptive field, lead, alignment padding)."""
    if args.type == "gt":
        if args.weights or args.random_init:
            raise UsageError("gt features have fixed parameters; --weights/--random-init do not apply")
        cfg = GammatoneConfig()
        extractor = GammatoneExtractor(cfg)
        # pre-emphasis reaches one sample further back
        extra = 1 if cfg.pre_emphasis_alpha > 0 else 0
        return extractor, cfg.num_frames, cfg.receptive_field + extra, extra, analysis.alignment_padding(cfg)
    cfg = convstack.build_config(args.type)
    if args.weights:
        weights = WeightArchive.load(args.weights)
    elif args.random_init:
        weights = convstack.init_weights(cfg, args.seed)
    else:
        raise UsageError(f"--type {args.type} needs --weights PATH or --random-init [--seed N]")
    front = convstack.ConvFrontEnd(cfg, weights)
    return (
        front,
        lambda m: analysis.output_length(cfg, m),
        analysis.receptive_field(cfg),
        analysis.receptive_field_lead(cfg),
        analysis.alignment_padding(cfg),
    )


def run_extract(args) -> int:
    if (args.chunk_size is None) != (args.chunk_shift is None):
        raise UsageError("--chunk-size and --chunk-shift go together")
    extract, num_frames, rf, lead, pad = _front_end(args)
    inputs = [Path(p) for p in args.paths[:-1]]
    if not inputs:
        raise UsageError("need at least one input WAV file and an output path")
    outputs = _output_paths(inputs, Path(args.paths[-1]), ".feat")
    chunking = None
    if args.chunk_size is not None:
        chunking = ChunkingConfig.from_seconds(args.chunk_size, args.chunk_shift)
    for src, dst in zip(inputs, outputs):
        try:
            w = read_wav(src)
            if args.align:
                w = Waveform(np.pad(w.samples, pad))
            if chunking is None:
                fm = extract(w)
            else:
                fm = stitched_extract(w, extract, chunking, num_frames(w.num_samples), rf, lead)
            write_features(fm, dst, args.format)
        except BaseException:
            remove_quietly(dst)
            raise
        print(f"{src}: T={fm.num_frames} F={fm.dim} frame_shift={fm.frame_shift_samples} -> {dst}")
    return 0


def run_analyze(args) -> int:
    types = FEATURE_TYPES if args.type == "all" else (args.type,)
    blocks = []
    for t in types:
        blocks.append(analysis.format_report(t, analysis.report_for(t, include_norm=not args.no_norm)))
    print("\n\n".join(blocks))
    return 0


def run_combine(args) -> int:
    paths = [Path(p) for p in args.paths[:-1]]
    output = Path(args.paths[-1])
    if len(paths) + (args.ivector is not None) < 2:
        raise UsageError("combine needs at least two streams (feature files, or one plus --ivector)")
    streams = [read_features(p, args.format) for p in paths]
    lengths = {str(p): s.num_frames for p, s in zip(paths, streams)}
    if len(set(lengths.values())) > 1 and not args.truncate:
        listing = ", ".join(f"{p}: T={t}" for p, t in lengths.items())
        raise RawFrontError(f"feature files have different frame counts ({listing}); use --truncate")
    if args.ivector is not None:
        iv = read_features(args.ivector, "raw_f32")
        if iv.num_frames != 1:
            raise RawFrontError(f"{args.ivector}: expected a single i-vector row, got {iv.num_frames}")
        t = min(s.num_frames for s in streams) if streams else 1
        shift = streams[0].frame_shift_samples if streams else iv.frame_shift_samples
        streams.append(FeatureMatrix(np.tile(iv.values, (t, 1)), shift))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        fm = concat_features(streams, truncate=args.truncate)
    try:
        write_features(fm, output, args.format)
    except BaseException:
        remove_quietly(output)
        raise
    print(f"T={fm.num_frames} F={fm.dim} frame_shift={fm.frame_shift_samples} -> {output}")
    return 0


def run_ivector(args) -> int:
    if args.model:
        model = IVectorModel.from_archive(WeightArchive.load(args.model))
    elif args.toy_model:
        model = toy_model(args.seed)
    else:
        raise UsageError("ivector needs --model PATH or --toy-model [--seed N]")
    if args.save_model:
        model.to_archive().save(args.save_model)
    inputs = [Path(p) for p in args.paths[:-1]]
    if not inputs:
        raise UsageError("need at least one input WAV file and an output path")
    outputs = _output_paths(inputs, Path(args.paths[-1]), ".ivec")
    for src, dst in zip(inputs, outputs):
        try:
            iv = utterance_ivector(read_wav(src), model, src.stem, vad_threshold_db=args.vad_threshold_db)
            write_features(FeatureMatrix(iv.values[None, :], SAMPLE_RATE // 100), dst, "raw_f32")
        except BaseException:
            remove_quietly(dst)
            raise
        print(f"{src}: i-vector dim={iv.dim} -> {dst}")
    return 0


def run_init_weights(args) -> int:
    cfg = convstack.build_config(args.type)
    archive = convstack.init_weights(cfg, args.seed)
    archive.save(args.output)
    print(f"{cfg.name}: {len(archive)} tensors, {archive.num_elements()} parameters -> {args.output}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rawfront",
        description="Raw-waveform speech features (16 kHz, one frame per 10 ms).",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser(
        "extract",
        help="extract features from WAV files",
        formatter_class=fmt,
        description=(
            "gt: 50 Gammatone FIR filters (640 taps, 100-7500 Hz, Greenwood spacing, order 4), "
            "pre-emphasis alpha 1.0, Hanning integration 400/160 samples, 10th root, DCT, "
            "utterance-level channel standardization. sc: 150 tf filters (256 taps, stride 10), "
            "5 shared low-passes (40 taps, stride 16), root 0.1, layer norm. w2v-*: wav2vec conv "
            "stack, valid-padded encoder, same-padded residual context network."
        ),
    )
    p.add_argument("--type", required=True, choices=FEATURE_TYPES)
    p.add_argument("--weights", help="WFE1 weight archive for sc / w2v-* front-ends")
    p.add_argument("--random-init", action="store_true", help="use deterministic random weights")
    p.add_argument("--seed", type=int, default=0, help="seed for --random-init")
    p.add_argument("--chunk-size", type=float, help="chunk size in seconds (chunking is off by default)")
    p.add_argument("--chunk-shift", type=float, help="chunk shift in seconds")
    p.add_argument(
        "--align",
        action="store_true",
        help="zero-pad the input so every front-end yields floor(M/160) frames (for combining)",
    )
    p.add_argument("--format", choices=FEATURE_FORMATS, default="raw_f32", help="feature file format")
    p.add_argument("paths", nargs="+", metavar="PATH", help="input WAV file(s) followed by the output path")
    p.set_defaults(func=run_extract)

    p = sub.add_parser("analyze", help="parameter counts and receptive fields", formatter_class=fmt)
    p.add_argument("--type", required=True, choices=(*FEATURE_TYPES, "all"))
    p.add_argument("--no-norm", action="store_true", help="exclude normalization parameters from counts")
    p.set_defaults(func=run_analyze)

    p = sub.add_parser("combine", help="frame-wise concatenation of feature files", formatter_class=fmt)
    p.add_argument("--ivector", help="i-vector file (1 x 200) to repeat on every frame")
    p.add_argument("--truncate", action="store_true", help="cut streams to the shortest instead of failing")
    p.add_argument("--format", choices=FEATURE_FORMATS, default="raw_f32", help="feature file format")
    p.add_argument("paths", nargs="+", metavar="PATH", help="feature files followed by the output path")
    p.set_defaults(func=run_combine)

    p = sub.add_parser(
        "ivector",
        help="per-utterance i-vectors",
        formatter_class=fmt,
        description=(
            "energy VAD (frames within --vad-threshold-db of the loudest kept), Gammatone features, "
            "context of 9 frames with clamped edges, LDA to 60, 200-dim i-vector, unit length"
        ),
    )
    p.add_argument("--model", help="WFE1 archive with ivec.ubm.*, ivec.T, ivec.lda")
    p.add_argument("--toy-model", action="store_true", help="use a deterministic random toy model")
    p.add_argument("--seed", type=int, default=0, help="seed for --toy-model")
    p.add_argument("--save-model", help="also write the model used to this archive")
    p.add_argument("--vad-threshold-db", type=float, default=40.0)
    p.add_argument("paths", nargs="+", metavar="PATH", help="input WAV file(s) followed by the output path")
    p.set_defaults(func=run_ivector)

    p = sub.add_parser("init-weights", help="write random front-end weights", formatter_class=fmt)
    p.add_argument("--type", required=True, choices=FEATURE_TYPES[1:])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("output")
    p.set_defaults(func=run_init_weights)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (RawFrontError, OSError) as exc:
        print(f"rawfront: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
