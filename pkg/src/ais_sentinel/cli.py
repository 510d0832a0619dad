"""Command-line entry point: scenario, simulate, decode, prepare, train, evaluate, predict."""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .codec import decode_lines, read_reports_csv, write_reports_csv
from .config import RunConfig, apply_overrides, load_config
from .errors import AisSentinelError, TrainingError, ValidationError
from .evaluation import (confusion, holdout_experiment, one_vs_rest, predictions_geojson,
                         run_experiment)
from .geo import GeoPoint
from .nn import load_model, predict, save_model, train
from .pipeline import (MinMaxScaler, PrepConfig, SampleSet, build_samples, encode_dataset,
                       extract_tracks, prepare_samples, read_dataset, resample_track,
                       split_dataset, write_dataset)
from .simgen import ChannelModel, format_stream, generate_scenario, load_scenario, save_scenario

log = logging.getLogger("ais_sentinel")

EXIT_OK, EXIT_IO, EXIT_VALIDATION, EXIT_TRAINING = 0, 2, 3, 4


class InputError(Exception):
    """Unreadable or unparsable input file."""


def _sidecar(csv_path, explicit=None) -> Path:
    return Path(explicit) if explicit else Path(csv_path).with_suffix(".json")


@contextlib.contextmanager
def _output(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _read_text(path) -> list[str]:
    if path in (None, "-"):
        return sys.stdin.read().splitlines()
    try:
        with open(path, encoding="ascii", errors="replace") as fh:
            return fh.read().splitlines()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from None


def _write_json(doc, path) -> None:
    with _output(path) as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _run_config(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    return apply_overrides(cfg, args)


def _check_mode(args, mode: str) -> None:
    if getattr(args, "mode", None) and args.mode != mode:
        raise ValidationError(f"--mode {args.mode} conflicts with input built for {mode}")


# --------------------------------------------------------------------------
# subcommands


def cmd_scenario(args) -> int:
    scenario = generate_scenario(n_vessels=args.vessels, duration=args.duration,
                                 seed=args.seed if args.seed is not None else 0, name=args.name)
    save_scenario(scenario, args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except OSError as exc:
        raise InputError(f"cannot read {args.scenario}: {exc.strerror or exc}") from None
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ValidationError(f"bad scenario file: {exc}") from None
    run = _run_config(args)
    if args.seed is not None:
        scenario.seed = args.seed
    if run.channel:
        ch = {**scenario.channel.__dict__, **run.channel}
        if isinstance(ch.get("station"), dict):
            ch["station"] = GeoPoint(**ch["station"])
        scenario.channel = ChannelModel(**ch)
    stream = scenario.run()
    with _output(args.out) as fh:
        fh.write(format_stream(stream))
    log.info("simulated %d sentences from %d vessels", len(stream), len(scenario.vessels))
    return EXIT_OK


def cmd_decode(args) -> int:
    lines = _read_text(args.input)
    reports, stats = decode_lines(lines)
    with _output(args.out) as fh:
        write_reports_csv(reports, fh)
    summary = stats.as_dict()
    if args.stats:
        _write_json(summary, args.stats)
    print(json.dumps({"decode": summary}, sort_keys=True), file=sys.stderr)
    return EXIT_OK


def _load_reports(path):
    try:
        with open(path, newline="") as fh:
            return read_reports_csv(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from None


def cmd_prepare(args) -> int:
    run = _run_config(args)
    cfg = run.prep_config()
    reports = _load_reports(args.reports)
    samples, summary = prepare_samples(reports, cfg, seed=run.seeds[0])
    write_dataset(samples, cfg, args.out, _sidecar(args.out, args.meta), summary)
    print(json.dumps({"prepare": {"rows": len(samples), **summary.as_dict()}}, sort_keys=True),
          file=sys.stderr)
    return EXIT_OK


def _load_dataset(args):
    try:
        return read_dataset(args.dataset, _sidecar(args.dataset, args.meta))
    except ValidationError:
        raise
    except OSError as exc:
        raise InputError(f"cannot read dataset: {exc.strerror or exc}") from None
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"dataset sidecar is incomplete: {exc}") from None
    except ValueError as exc:
        # pandas parser errors
        raise InputError(f"cannot parse dataset: {exc}") from None


def cmd_train(args) -> int:
    run = _run_config(args)
    ds = _load_dataset(args)
    _check_mode(args, ds.cfg.mode)
    config = run.train_config()
    if args.all_rows:
        train_ds, val_ds = ds.subset(np.arange(len(ds)), refit=True), None
    else:
        train_ds, val_ds = split_dataset(ds, run.split_ratio, config.seed)
    model, report = train(train_ds, config)
    save_model(model, args.out)
    doc = report.as_dict(timing=not args.no_timing)
    if val_ds is not None and len(val_ds):
        pred, _ = predict(model, val_ds.feature_matrix)
        cm = confusion(val_ds.labels, pred, len(ds.class_names), ds.class_names)
        doc["validation"] = {"accuracy": cm.accuracy, "confusion": cm.counts.tolist(),
                             "rows": len(val_ds)}
    if args.report:
        _write_json(doc, args.report)
    log.info("trained %d epochs, final loss %.3g", report.epochs_run, report.final_loss)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    run = _run_config(args)
    ds = _load_dataset(args)
    _check_mode(args, ds.cfg.mode)
    config = run.train_config()
    if run.holdout_fraction is not None:
        metrics = holdout_experiment(ds, config, run.holdout_fraction, run.seeds, run.split_ratio,
                                     holdout_seed=run.seeds[0])
    else:
        metrics = run_experiment(ds, config, run.seeds, run.split_ratio)
    with _output(args.out) as fh:
        fh.write(metrics.to_json(timing=not args.no_timing))
    if args.geojson:
        first = metrics.runs[0]
        _write_json(predictions_geojson(first.target.samples, first.target.labels,
                                        first.predictions, ds.class_names), args.geojson)
    if args.out not in (None, "-"):
        print(metrics.confusion.table())
        for row in one_vs_rest(metrics.confusion):
            print(f"{row['class']}: TP rate {row['tp_rate']:.4f}  TN rate {row['tn_rate']:.4f}")
    return EXIT_OK


def cmd_predict(args) -> int:
    try:
        model = load_model(args.model)
    except OSError as exc:
        raise InputError(f"cannot read model: {exc.strerror or exc}") from None
    if not model.prep_config or not model.scaler:
        raise ValidationError("model file lacks preprocessing settings")
    base = PrepConfig.from_dict(model.prep_config)
    run = apply_overrides(RunConfig(mode=base.mode, prep=base.to_dict()), args)
    cfg = run.prep_config()
    reports = _load_reports(args.reports)
    tracks = extract_tracks(reports, cfg)
    samples = SampleSet.concat([build_samples(resample_track(t, cfg), cfg) for t in tracks if t.reports],
                               cfg.slots)
    ds = encode_dataset(samples, cfg, scaler=MinMaxScaler.from_dict(model.scaler))
    if len(ds):
        pred, proba = predict(model, ds.feature_matrix)
    else:
        pred, proba = np.zeros(0, dtype=np.int64), np.zeros((0, model.K))
    import pandas as pd

    names = model.class_names
    frame = pd.DataFrame({
        "mmsi": samples.mmsi,
        "anchor_time": samples.anchor_time,
        "lat": samples.features[:, 0, 0] if len(samples) else [],
        "lon": samples.features[:, 0, 1] if len(samples) else [],
        "anchor_distance_nmi": samples.anchor_distance,
        "rule_label": [names[i] for i in samples.label],
        "predicted_label": [names[i] for i in pred],
    })
    for k, name in enumerate(names):
        frame[f"p_{name}"] = proba[:, k]
    with _output(args.out) as fh:
        frame.to_csv(fh, index=False, lineterminator="\n")
    if args.geojson:
        _write_json(predictions_geojson(samples, samples.label, pred, names), args.geojson)
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def _add_run_flags(p: argparse.ArgumentParser, prep: bool = True) -> None:
    p.add_argument("--config", help="run configuration JSON; flags override its values")
    p.add_argument("--mode", choices=("2-class", "3-class"))
    p.add_argument("--seed", type=int, help="single seed (overrides --seeds)")
    p.add_argument("--seeds", help="comma-separated seeds, e.g. 0,1,2")
    if prep:
        p.add_argument("--tau", type=float, help="resampling interval in seconds")
        p.add_argument("--window", type=float, help="sample window length in seconds")
        p.add_argument("--threshold-x", dest="threshold_x", type=float,
                       help="fraction of missing slots that marks an anomaly")
        p.add_argument("--station-lat", dest="station_lat", type=float)
        p.add_argument("--station-lon", dest="station_lon", type=float)
        p.add_argument("--range-nmi", dest="range_nmi", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ais-sentinel",
                                     description="AIS on-off switching anomaly detection")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scenario", help="generate a synthetic traffic scenario file")
    p.add_argument("--vessels", type=int, default=110)
    p.add_argument("--duration", type=float, default=10_800.0)
    p.add_argument("--seed", type=int)
    p.add_argument("--name", default="desk")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("simulate", help="scenario JSON to timestamped NMEA")
    p.add_argument("scenario")
    p.add_argument("--config")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("decode", help="NMEA to decoded position-report CSV")
    p.add_argument("input", nargs="?", default="-")
    p.add_argument("--out", help="output CSV (default stdout)")
    p.add_argument("--stats", help="write decode counters as JSON")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("prepare", help="report CSV to labelled dataset CSV plus JSON sidecar")
    p.add_argument("reports")
    _add_run_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--meta", help="sidecar path (default: --out with .json suffix)")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train one model on a dataset")
    p.add_argument("dataset")
    _add_run_flags(p, prep=False)
    p.add_argument("--meta")
    p.add_argument("--out", required=True, help="model JSON")
    p.add_argument("--report", help="training report JSON")
    p.add_argument("--all-rows", dest="all_rows", action="store_true",
                   help="train on every row instead of the seeded split")
    p.add_argument("--no-timing", dest="no_timing", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="multi-seed train/evaluate with pooled confusion matrix")
    p.add_argument("dataset")
    _add_run_flags(p, prep=False)
    p.add_argument("--meta")
    p.add_argument("--holdout-by-vessel", dest="holdout_by_vessel", type=float, metavar="FRACTION",
                   help="hold out this fraction of vessels and test on their real samples")
    p.add_argument("--out", help="metrics JSON (default stdout)")
    p.add_argument("--geojson", help="GeoJSON of the first seed's predictions")
    p.add_argument("--no-timing", dest="no_timing", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="label report windows with a saved model")
    p.add_argument("model")
    p.add_argument("reports")
    _add_run_flags(p)
    p.add_argument("--out", help="predictions CSV (default stdout)")
    p.add_argument("--geojson")
    p.set_defaults(func=cmd_predict)
    return parser


def _fail(code: int, exc: BaseException) -> int:
    doc = {"error": {"type": type(exc).__name__, "message": str(exc), "exit_code": code}}
    print(json.dumps(doc, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InputError, OSError, UnicodeDecodeError) as exc:
        return _fail(EXIT_IO, exc)
    except TrainingError as exc:
        return _fail(EXIT_TRAINING, exc)
    except (ValidationError, json.JSONDecodeError) as exc:
        return _fail(EXIT_VALIDATION, exc)
    except AisSentinelError as exc:
        return _fail(EXIT_VALIDATION, exc)


if __name__ == "__main__":
    sys.exit(main())
