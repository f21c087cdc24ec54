"""Command-line interface: ``dyskit {extract,synth,train,classify,evaluate}``.

Exit codes: 0 success, 2 usage/manifest/input-format error, 3 audio error,
4 I/O error, 5 single-class data, 6 SVM did not converge, 7 model/feature
dimension mismatch.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields
from pathlib import Path

from dyskit import corpus, knn, svm
from dyskit.audio import extract_segment, read_wav, write_wav
from dyskit.corpus import Dataset, SynthParams, featurize
from dyskit.errors import (
    AudioError,
    ClassTooSmall,
    DidNotConverge,
    DimensionMismatch,
    EmptyDataset,
    FrontendError,
    IncompatibleFeatures,
    ManifestParseError,
    MissingAudio,
    ModelFormatError,
    SegmentError,
    SingleClassDataset,
)
from dyskit.evaluation import KnnSpec, SvmSpec, format_table, report_csv, run_trials
from dyskit.features import AggregationStrategy
from dyskit.mfcc import FrontendConfig
from dyskit.svm import KernelSpec, SvmTrainConfig

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_AUDIO = 3
EXIT_IO = 4
EXIT_SINGLE_CLASS = 5
EXIT_NOT_CONVERGED = 6
EXIT_DIMENSION = 7

# most specific first; MissingAudio is also an OSError
_EXIT_CODES = [
    (MissingAudio, EXIT_AUDIO),
    (SegmentError, EXIT_AUDIO),
    (AudioError, EXIT_AUDIO),
    (SingleClassDataset, EXIT_SINGLE_CLASS),
    (DidNotConverge, EXIT_NOT_CONVERGED),
    (DimensionMismatch, EXIT_DIMENSION),
    (IncompatibleFeatures, EXIT_DIMENSION),
    (ManifestParseError, EXIT_INPUT),
    (EmptyDataset, EXIT_INPUT),
    (ClassTooSmall, EXIT_INPUT),
    (ModelFormatError, EXIT_INPUT),
    (FrontendError, EXIT_INPUT),
    (OSError, EXIT_IO),
    (ValueError, EXIT_INPUT),
]

_FRONTEND_FLAGS = {
    "pre_emphasis": "pre_emphasis_a",
    "frame_len": "frame_len_s",
    "frame_hop": "frame_hop_s",
    "n_fft": "n_fft",
    "n_mels": "n_mel_filters",
    "n_ceps": "n_ceps",
    "f_low": "f_low_hz",
    "f_high": "f_high_hz",
    "log_floor": "log_floor",
}


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _echo_config(command: str, config: dict) -> None:
    print(f"[dyskit {command}] resolved config:", file=sys.stderr)
    for key, value in config.items():
        print(f"  {key} = {value}", file=sys.stderr)


def _add_frontend_flags(p):
    g = p.add_argument_group("front-end")
    g.add_argument("--pre-emphasis", type=float, help="pre-emphasis coefficient in [0.9, 1.0] (default 0.97)")
    g.add_argument("--frame-len", type=float, help="frame length in seconds (default 0.025)")
    g.add_argument("--frame-hop", type=float, help="frame hop in seconds (default 0.010)")
    g.add_argument("--n-fft", type=int, help="FFT size, power of two (default: smallest covering a frame)")
    g.add_argument("--n-mels", type=int, help="number of Mel filters (default 26)")
    g.add_argument("--n-ceps", type=int, help="number of cepstral coefficients (default 12)")
    g.add_argument("--f-low", type=float, help="lowest filter edge in Hz (default 0)")
    g.add_argument("--f-high", type=float, help="highest filter edge in Hz (default Nyquist)")
    g.add_argument("--log-floor", type=float, help="floor applied before the log (default 1e-10)")
    g.add_argument("--agg", choices=[s.value for s in AggregationStrategy],
                   help="frame aggregation (default mean)")


def _add_classifier_flags(p, allow_both=False):
    g = p.add_argument_group("classifier")
    choices = ["knn", "svm", "both"] if allow_both else ["knn", "svm"]
    g.add_argument("--clf", choices=choices, default="both" if allow_both else "knn")
    g.add_argument("--k", type=int, default=knn.DEFAULT_K, help="neighbours for k-NN (default 3)")
    g.add_argument("--kernel", choices=["linear", "rbf"], default="linear")
    g.add_argument("--C", type=float, default=1.0, help="SVM box constraint (default 1.0)")
    g.add_argument("--gamma", type=float, help="RBF width (default 1/d)")
    g.add_argument("--tol", type=float, default=1e-3, help="SMO KKT tolerance (default 1e-3)")
    g.add_argument("--max-passes", type=int, default=100)
    g.add_argument("--seed", type=int, default=0, help="seed for every random choice (default 0)")


def _frontend_overrides(args) -> dict:
    return {field_: getattr(args, flag) for flag, field_ in _FRONTEND_FLAGS.items()
            if getattr(args, flag, None) is not None}


def _frontend(args) -> FrontendConfig:
    return FrontendConfig(**_frontend_overrides(args))


def _aggregation(args) -> AggregationStrategy:
    return AggregationStrategy(args.agg or AggregationStrategy.MEAN.value)


def _is_feature_file(path: Path) -> bool:
    with path.open() as fh:
        return fh.readline().startswith(corpus.FEATURES_TAG)


def _load_dataset(args) -> Dataset:
    path = Path(args.input)
    if not path.is_file():
        raise CliError(f"input file not found: {path}", EXIT_INPUT)
    if _is_feature_file(path):
        dataset = corpus.read_features(path)
        overrides = _frontend_overrides(args)
        if overrides or args.agg:
            wanted = FrontendConfig(**{**{f.name: getattr(dataset.frontend, f.name)
                                          for f in fields(FrontendConfig)}, **overrides})
            dataset.check_compatible(args.agg or dataset.aggregation, wanted)
    else:
        dataset = corpus.load_manifest(path, _frontend(args), _aggregation(args))
    if len(dataset) == 0:
        raise EmptyDataset(f"{path} contains no items")
    return dataset


def _svm_config(args) -> SvmTrainConfig:
    return SvmTrainConfig(
        C=args.C, tolerance=args.tol, max_passes=args.max_passes,
        kernel=KernelSpec(args.kernel, args.gamma), seed=args.seed,
    )


def _specs(args):
    out = []
    if args.clf in ("knn", "both"):
        out.append(KnnSpec(args.k))
    if args.clf in ("svm", "both"):
        out.append(SvmSpec(_svm_config(args)))
    return out


def _write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


# subcommands ----------------------------------------------------------------

def cmd_extract(args) -> int:
    frontend, agg = _frontend(args), _aggregation(args)
    _echo_config("extract", {"manifest": args.manifest, "output": args.output, "aggregation": agg.value,
                             **{k: v for k, v in vars(frontend).items()}})
    dataset = corpus.load_manifest(args.manifest, frontend, agg)
    _write(args.output, dataset.to_csv())
    print(f"extracted {len(dataset)} items, dimension {dataset.dimension} -> {args.output}")
    return EXIT_OK


def cmd_synth(args) -> int:
    params = SynthParams(seed=args.seed, sample_rate_hz=args.sample_rate, syllable_count=args.syllables,
                         base_pitch_hz=args.pitch, dysfluency_rate=args.rate)
    _echo_config("synth", {"output_dir": args.output_dir, "per_class": args.per_class, **vars(params)})
    if args.per_class < 2:
        raise CliError(f"--per-class must be at least 2 to leave items for both training and testing, "
                       f"got {args.per_class}", EXIT_INPUT)
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for source_id, label, dtype, clip in corpus.synthetic_items(params, args.per_class):
        name = f"{source_id}.wav"
        write_wav(out / name, clip)
        rows.append((name, 0.0, clip.duration_s, label, dtype))
    corpus.write_manifest(out / "manifest.csv", rows)
    print(f"wrote {len(rows)} WAV files and {out / 'manifest.csv'}")
    return EXIT_OK


def cmd_train(args) -> int:
    dataset = _load_dataset(args)
    spec = _specs(args)[0]
    _echo_config("train", {"input": args.input, "output": args.output, "classifier": spec.name,
                           "aggregation": dataset.aggregation.value, "frontend": dataset.frontend.snapshot(),
                           **({"seed": args.seed, "tol": args.tol, "max_passes": args.max_passes}
                              if args.clf == "svm" else {})})
    model = spec.train(dataset)
    if args.clf == "knn":
        text = knn.dumps(model)
        summary = f"k-NN model: {len(model)} stored points, dimension {model.dimension}, k={args.k}"
    else:
        if not model.converged and not args.allow_unconverged:
            raise DidNotConverge(
                f"SMO stopped with KKT violation {model.max_violation:.3g} "
                f"(> 10 x tolerance {args.tol:g}); rerun with --allow-unconverged to keep it"
            )
        text = svm.dumps(model)
        summary = (f"SVM model: {model.n_support} support vectors of {len(dataset)} points, "
                   f"dimension {model.dimension}, converged={str(model.converged).lower()} "
                   f"after {model.sweeps} sweeps")
    _write(args.output, text)
    print(summary)
    return EXIT_OK


def _load_model(path):
    text = Path(path).read_text()
    first = text.split("\n", 1)[0].strip()
    if first == knn.MAGIC:
        return knn.loads(text)
    if first == svm.MAGIC:
        return svm.loads(text)
    raise ModelFormatError(f"{path}: unknown model header {first!r}")


def cmd_classify(args) -> int:
    model = _load_model(args.model)
    _echo_config("classify", {"model": args.model, "kind": type(model).__name__,
                              "dimension": model.dimension, "aggregation": model.aggregation.value,
                              "frontend": model.frontend.snapshot()})
    if args.features:
        dataset = corpus.read_features(args.features)
        if len(dataset) and dataset.dimension != model.dimension:
            raise DimensionMismatch(
                f"features in {args.features} have dimension {dataset.dimension}, "
                f"model expects dimension {model.dimension}"
            )
        dataset.check_compatible(model.aggregation, model.frontend)
        queries = [(item.source_id, item.features) for item in dataset]
    else:
        clip = read_wav(args.wav)
        source_id = Path(args.wav).name
        if args.start is not None or args.end is not None:
            start = args.start or 0.0
            end = args.end if args.end is not None else clip.duration_s
            clip = extract_segment(clip, start, end)
            source_id = f"{source_id}@{start:g}-{end:g}"
        queries = [(source_id, featurize(clip, model.frontend, model.aggregation))]

    for source_id, x in queries:
        if isinstance(model, knn.KnnModel):
            label, votes = knn.knn_classify(model, x, model.k)
            score = votes[label] / model.k
        else:
            score = model.decision(x)
            label = svm.svm_classify(model, x)
        print(f"{source_id} {label.value} {score:.6g}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    if args.synthetic:
        params = SynthParams(seed=args.seed)
        dataset = corpus.build_synthetic_dataset(params, args.per_class, _frontend(args), _aggregation(args))
        source = f"synthetic corpus (seed {args.seed}, {args.per_class} per class)"
    elif args.input:
        dataset = _load_dataset(args)
        source = args.input
    else:
        raise CliError("evaluate needs an input manifest/feature file or --synthetic", EXIT_INPUT)
    specs = _specs(args)
    _echo_config("evaluate", {"input": source, "classifiers": ", ".join(s.name for s in specs),
                              "trials": args.trials, "seed": args.seed, "train_fraction": args.train_fraction,
                              "aggregation": dataset.aggregation.value, "frontend": dataset.frontend.snapshot()})
    reports = [run_trials(dataset, spec, args.trials, args.seed, args.train_fraction) for spec in specs]
    sys.stdout.write(format_table(reports))
    if args.csv:
        _write(args.csv, report_csv(reports))
    if args.predictions:
        lines = ["trial,classifier,source_id,truth,predicted,score"]
        for r in reports:
            for t in r.trials:
                for p in t.predictions:
                    lines.append(f"{t.index + 1},{r.classifier_id},{p.source_id},{p.truth.value},"
                                 f"{p.predicted.value},{p.score:.6g}")
        _write(args.predictions, "\n".join(lines) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dyskit", description="Dysfluent vs fluent speech classification")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="manifest -> feature CSV")
    p.add_argument("manifest")
    p.add_argument("-o", "--output", required=True)
    _add_frontend_flags(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("synth", help="write a synthetic WAV corpus and its manifest")
    p.add_argument("output_dir")
    p.add_argument("--per-class", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sample-rate", type=int, default=16000)
    p.add_argument("--syllables", type=int, default=8)
    p.add_argument("--pitch", type=float, default=140.0)
    p.add_argument("--rate", type=float, default=0.4, help="dysfluency rate in (0, 1]")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a k-NN or SVM model")
    p.add_argument("input", help="feature CSV or manifest")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--allow-unconverged", action="store_true")
    _add_frontend_flags(p)
    _add_classifier_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("classify", help="classify feature rows or a WAV segment")
    p.add_argument("model")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--features")
    src.add_argument("--wav")
    p.add_argument("--start", type=float)
    p.add_argument("--end", type=float)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("evaluate", help="repeated random-split evaluation")
    p.add_argument("input", nargs="?", help="feature CSV or manifest")
    p.add_argument("--synthetic", action="store_true", help="evaluate on the built-in synthetic corpus")
    p.add_argument("--per-class", type=int, default=50, help="synthetic items per class (default 50)")
    p.add_argument("--trials", type=int, default=3)
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--csv", help="write per-trial results as CSV")
    p.add_argument("--predictions", help="write per-item predictions as CSV")
    _add_frontend_flags(p)
    _add_classifier_flags(p, allow_both=True)
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"dyskit {args.command}: {exc}", file=sys.stderr)
        return exc.code
    except Exception as exc:
        for kind, code in _EXIT_CODES:
            if isinstance(exc, kind):
                print(f"dyskit {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
                return code
        raise


if __name__ == "__main__":
    sys.exit(main())
