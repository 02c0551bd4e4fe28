"""Command-line entry point: ``cochleanet encode|split|train|eval|inspect|synth``.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import cochlea, experiment, synthetic
from .errors import CochleaNetError

log = logging.getLogger("cochleanet")


def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with flat dotted keys")
    p.add_argument("--data", dest="dataset.root", help="encoded dataset root")
    p.add_argument("--labels", dest="dataset.labels", help="comma-separated labels")
    p.add_argument("--seed", type=int)
    p.add_argument("--fraction", dest="split.fraction", type=float)
    p.add_argument("--n", dest="local.n", type=int)
    p.add_argument("--lk", dest="local.lk", type=int)
    p.add_argument("--tau-local", dest="local.tau_s", type=float, help="seconds")
    p.add_argument("--ck", dest="cross.ck", type=int)
    p.add_argument("--tau-cr", dest="cross.tau_s", type=float, help="seconds")
    p.add_argument("--mlp-epochs", dest="mlp.epochs", type=int)
    p.add_argument("--jobs", type=int)


def _config_from(args) -> experiment.ExperimentConfig:
    keys = set(experiment.ExperimentConfig.KEYS)
    overrides = {k: v for k, v in vars(args).items() if k in keys}
    return experiment.load_config(args.config, overrides)


def _filterbank_from(args) -> cochlea.FilterBankConfig:
    try:
        return cochlea.FilterBankConfig(num_channels=args.channels, f_low_hz=args.flow,
                                        f_high_hz=args.fhigh, order=args.order, q=args.q)
    except ValueError as exc:
        raise experiment.ConfigError(str(exc)) from exc


def cmd_encode(args) -> int:
    result = experiment.encode_dataset(args.in_dir, args.out, _filterbank_from(args),
                                       args.polarity_even_positive, args.jobs)
    print(f"encoded {result.written} files, skipped {result.skipped}")
    if result.skipped:
        print(f"warning: {result.skipped} file(s) could not be encoded", file=sys.stderr)
    return 0


def cmd_split(args) -> int:
    cfg = _config_from(args)
    train, test = experiment.resolve_split(cfg)
    doc = {"seed": cfg.seed, "fraction": cfg.split_fraction,
           "train": [it.id for it in train], "test": [it.id for it in test]}
    text = json.dumps(doc, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    print(f"train {len(train)} / test {len(test)}", file=sys.stderr)
    return 0


def cmd_train(args) -> int:
    cfg = _config_from(args)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    model_bytes, train_log = experiment.train(cfg)
    out.write_bytes(model_bytes)
    out.with_suffix(".log.json").write_text(json.dumps(train_log, indent=2) + "\n")
    print(f"model written to {out}")
    return 0


def cmd_eval(args) -> int:
    cfg = _config_from(args)
    model_path = Path(args.model)
    if not model_path.is_file():
        raise experiment.ConfigError(f"model file not found: {model_path}")
    result = experiment.evaluate_model(model_path.read_bytes(), cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.json").write_bytes(experiment.dump_metrics(result.metrics))
    (out / "report.txt").write_text(result.table)
    (out / "histograms.csv").write_text(result.histograms_csv)
    (out / "accuracy.csv").write_text(result.accuracy_csv)
    (out / "timing.json").write_text(json.dumps({"eval_runtime_s": result.runtime_s}) + "\n")
    sys.stdout.write(result.table)
    return 0


def cmd_inspect(args) -> int:
    report = experiment.inspect_file(args.file, args.polarity_even_positive)
    sys.stdout.write(report.text(args.first))
    if args.raster:
        Path(args.raster).write_text(experiment.raster_csv(report.stream))
    return 0


def cmd_synth(args) -> int:
    if args.kind == "tones":
        items = synthetic.tone_pair_dataset(args.count, duration_s=args.duration, seed=args.seed)
    else:
        items = synthetic.chirp_pair_dataset(args.count, duration_s=args.duration,
                                             seed=args.seed)
    n = synthetic.write_wav_dataset(args.out, items)
    print(f"wrote {n} wav files to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cochleanet", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", parents=[common], help="convert a WAV dataset into AEDAT spike files")
    p.add_argument("in_dir")
    p.add_argument("--out", required=True)
    p.add_argument("--flow", type=float, default=20.0, help="lowest center frequency (Hz)")
    p.add_argument("--fhigh", type=float, default=20000.0, help="highest center frequency (Hz)")
    p.add_argument("--channels", type=int, default=32)
    p.add_argument("--q", type=float, default=4.0)
    p.add_argument("--order", type=int, default=2)
    p.add_argument("--polarity-even-positive", action=argparse.BooleanOptionalAction,
                   default=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("split", parents=[common], help="show the balanced train/test split")
    _add_experiment_flags(p)
    p.add_argument("--out", help="write split JSON here instead of stdout")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", parents=[common], help="train both layers and the classifiers")
    _add_experiment_flags(p)
    p.add_argument("--out", required=True, help="model JSON path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="evaluate a trained model on its split")
    p.add_argument("model")
    _add_experiment_flags(p)
    p.add_argument("--out", required=True, help="directory for metrics and CSVs")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("inspect", parents=[common], help="dump an AEDAT file")
    p.add_argument("file")
    p.add_argument("--first", type=int, default=10)
    p.add_argument("--raster", help="write timestamp,channel CSV here")
    p.add_argument("--polarity-even-positive", action=argparse.BooleanOptionalAction,
                   default=True)
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic two-class WAV dataset")
    p.add_argument("kind", choices=["tones", "chirps"])
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=100, help="clips per class")
    p.add_argument("--duration", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except experiment.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (CochleaNetError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
