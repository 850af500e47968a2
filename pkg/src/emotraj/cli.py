"""Command-line entry point: synth, train, classify, evaluate, detect.

Exit status is 0 on success, 2 on bad usage, otherwise the ``exit_code``
of the raised :mod:`emotraj.errors` class.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import modelfile
from .errors import ConfigurationError, DimensionMismatch, EmotrajError, EmptyTestSet, IoError, UnknownLabel
from .evaluation import evaluate, format_csv, format_table, split_dataset
from .haarlite import detect
from .imagecore import (
    DEFAULT_EMOTIONS,
    image_to_vector,
    load_manifest,
    load_sequence,
    read_image,
)
from .pipeline import train_detector, train_pipeline
from .synthgen import SynthConfig, generate, load_config


def _size(text: str) -> tuple[int, int]:
    parts = text.lower().split("x")
    try:
        dims = [int(p) for p in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad size {text!r}; use N or WxH") from None
    if len(dims) == 1:
        dims = dims * 2
    if len(dims) != 2 or min(dims) < 1:
        raise argparse.ArgumentTypeError(f"bad size {text!r}; use N or WxH")
    return dims[0], dims[1]


def _emotions(text: str) -> tuple[str, ...]:
    names = tuple(s.strip() for s in text.split(",") if s.strip())
    if not names:
        raise argparse.ArgumentTypeError("empty emotion list")
    return names


def _scales(text: str) -> list[float]:
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad scale list {text!r}") from None


def _fraction(text: str) -> float:
    v = float(text)
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError("train fraction must lie strictly between 0 and 1")
    return v


def _load(args, path=None):
    return load_manifest(path or args.manifest, emotions=args.emotions, canonical_size=args.canonical_size)


def _maybe_split(manifest, args, part: str):
    if args.train_fraction is None:
        return manifest
    train, test = split_dataset(manifest, args.train_fraction, args.seed)
    return train if part == "train" else test


def cmd_synth(args) -> int:
    overrides = {}
    for flag, name in (("seed", "seed"), ("per_emotion", "sequences_per_emotion"),
                       ("noise_sigma", "noise_sigma"), ("gain", "deformation_gain"), ("emotions", "emotions")):
        if getattr(args, flag) is not None:
            overrides[name] = getattr(args, flag)
    if args.canonical_size is not None:
        overrides["width"], overrides["height"] = args.canonical_size
    try:
        cfg = load_config(args.config) if args.config else SynthConfig()
        cfg = replace(cfg, **overrides)
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from exc
    manifest = generate(cfg, args.out)
    n = len(manifest.records)
    print(f"wrote {n} sequences, {n * cfg.length} images, manifest {Path(args.out) / 'manifest.csv'}")
    return 0


def cmd_train(args) -> int:
    manifest = _maybe_split(_load(args), args, "train")
    pipeline, report = train_pipeline(manifest, k=args.k, d=args.d, centering=args.centering == "on")
    if args.detector_rounds > 0:
        faces = [img for rec in manifest.records for img in load_sequence(rec, manifest.canonical_size)[:1]]
        boost = train_detector(faces, args.detector_window, args.detector_rounds, args.seed)
        pipeline = replace(pipeline, stumps=tuple(boost.stumps), detector_window=args.detector_window)
        print(f"detector: {len(boost.stumps)} stumps, window {args.detector_window}")
    modelfile.save(pipeline, args.model)
    print(f"training sequences: {len(manifest.records)}")
    print(f"K effective: {report.effective_k}")
    flag = " (reduced)" if report.reduced else ""
    print(f"directions{flag}: " + " ".join(str(i) for i in report.directions))
    for emotion, r in report.training_residuals.items():
        print(f"training residual {emotion}: {r:.6g}")
    print(f"model written to {args.model}")
    return 0


def _print_line(seq_id, label, residuals):
    print(f"{seq_id} {label} " + " ".join(f"{r:.6g}" for r in residuals))


def cmd_classify(args) -> int:
    pipeline = modelfile.load(args.model)
    if args.frames:
        if len(args.frames) != pipeline.length:
            raise DimensionMismatch(f"expected {pipeline.length} frames, got {len(args.frames)}")
        images = [read_image(p) for p in args.frames]
        for p, img in zip(args.frames, images):
            if img.size != pipeline.canonical_size:
                raise DimensionMismatch(f"{p}: frames given without eye coordinates must be canonical size")
        idx, res = pipeline.classify_frames(np.stack([image_to_vector(i) for i in images]))
        _print_line(args.sequence_id, pipeline.emotions[idx], res)
        return 0
    manifest = load_manifest(args.manifest, emotions=args.emotions, canonical_size=pipeline.canonical_size)
    manifest = _maybe_split(manifest, args, "test")
    for rec in manifest.records:
        idx, res = pipeline.classify_record(rec)
        _print_line(rec.sequence_id, pipeline.emotions[idx], res)
    return 0


def cmd_evaluate(args) -> int:
    pipeline = modelfile.load(args.model)
    manifest = load_manifest(args.manifest, emotions=args.emotions, canonical_size=pipeline.canonical_size)
    test = _maybe_split(manifest, args, "test")
    if not test.records:
        raise EmptyTestSet("test manifest holds no sequences")
    unknown = sorted({r.label for r in test.records} - set(pipeline.emotions))
    if unknown:
        raise UnknownLabel(f"labels {unknown} are not known to the model")
    cm, _ = evaluate(pipeline, test)
    print(format_csv(cm) if args.report == "csv" else format_table(cm), end="")
    if args.out:
        try:
            Path(args.out).write_text(format_csv(cm))
        except OSError as exc:
            raise IoError(f"cannot write report {args.out}: {exc}") from exc
    return 0


def cmd_detect(args) -> int:
    pipeline = modelfile.load(args.model)
    if not pipeline.stumps:
        raise ConfigurationError("model has no detector; train with --detector-rounds")
    for path in args.images:
        img = read_image(path)
        hits = detect(img, pipeline.stumps, pipeline.detector_window, args.stride, args.scales)
        for d in hits:
            print(f"{path} {d.x} {d.y} {d.size} {d.score:.6f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="emotraj", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, manifest_required=True):
        p.add_argument("--manifest", required=manifest_required, help="manifest CSV")
        p.add_argument("--emotions", type=_emotions, default=DEFAULT_EMOTIONS,
                       help="comma-separated emotion names (default: %(default)s)")
        p.add_argument("--canonical-size", type=_size, default=(64, 64), help="N or WxH (default 64)")
        p.add_argument("--train-fraction", type=_fraction, default=None,
                       help="split the manifest and use the train (train) or test (classify/evaluate) part")
        p.add_argument("--seed", type=int, default=7, help="split / detector seed (default 7)")

    p = sub.add_parser("synth", help="write a synthetic dataset")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--per-emotion", type=int)
    p.add_argument("--noise-sigma", type=float)
    p.add_argument("--gain", type=float)
    p.add_argument("--emotions", type=_emotions)
    p.add_argument("--canonical-size", type=_size)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="fit eigenfaces and emotion polynomials")
    common(p)
    p.add_argument("--model", required=True, help="output model file")
    p.add_argument("--k", type=int, default=50, help="eigenfaces to keep (default 50)")
    p.add_argument("--d", type=int, default=10, help="discriminating directions (default 10)")
    p.add_argument("--centering", choices=("on", "off"), default="on")
    p.add_argument("--detector-rounds", type=int, default=0, help="AdaBoost rounds for the face detector")
    p.add_argument("--detector-window", type=int, default=16)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("classify", help="label sequences")
    common(p, manifest_required=False)
    p.add_argument("--model", required=True)
    p.add_argument("--frames", nargs="+", help="canonical-size frames of one sequence, in order")
    p.add_argument("--sequence-id", default="sequence")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("evaluate", help="confusion matrix on a test manifest")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--report", choices=("text", "csv"), default="text")
    p.add_argument("--out", help="also write the CSV report here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("detect", help="run the stump detector over images")
    p.add_argument("--model", required=True)
    p.add_argument("--stride", type=int, default=2)
    p.add_argument("--scales", type=_scales, default=[1.0, 2.0, 4.0])
    p.add_argument("images", nargs="+")
    p.set_defaults(func=cmd_detect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "classify" and not args.frames and not args.manifest:
        parser.error("classify needs --manifest or --frames")
    try:
        return args.func(args)
    except EmotrajError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
