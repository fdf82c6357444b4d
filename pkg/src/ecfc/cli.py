"""Command-line driver: ingest, synth, train, evaluate, forecast, sweep.

Every command writes its artifacts under ``--out`` (default ``run``) plus a
``manifest_<command>.json`` with the resolved configuration and input
checksums.  Exit codes: 0 ok, 2 usage or configuration error, 3 data
error, 4 I/O or checkpoint error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .checkpoint import load_checkpoint
from .config import TrainConfig
from .errors import (
    BoundsError,
    CheckpointError,
    ConfigError,
    ContractError,
    DataError,
    UndefinedMetricError,
)
from .forecast import horizon_sweep
from .ingest import SLOTS_PER_DAY, GapPolicy, Layout, flatten, parse_table, read_series, write_series
from .synth import SynthParams, synthesize
from .trainer import fit, history_csv, validate

log = logging.getLogger("ecfc")

EXIT_USAGE, EXIT_DATA, EXIT_IO = 2, 3, 4


@dataclass(frozen=True)
class RunConfig:
    """A JSON run file: TrainConfig keys plus paths and sweep lists."""

    train: TrainConfig = field(default_factory=TrainConfig)
    series: str | None = None
    checkpoint_dir: str | None = None
    out_dir: str | None = None
    window_sizes: tuple = (48, 96)
    horizons_days: tuple = (2, 5, 10)

    RUN_KEYS = ("series", "checkpoint_dir", "out_dir", "window_sizes", "horizons_days")

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        run = {k: d.pop(k) for k in cls.RUN_KEYS if k in d}
        for key in ("window_sizes", "horizons_days"):
            if key in run:
                run[key] = tuple(run[key])
        return cls(TrainConfig.from_dict(d), **run)

    @classmethod
    def load(cls, path: str | None) -> "RunConfig":
        if path is None:
            return cls()
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        d = self.train.to_dict()
        d.update(series=self.series, checkpoint_dir=self.checkpoint_dir, out_dir=self.out_dir,
                 window_sizes=list(self.window_sizes), horizons_days=list(self.horizons_days))
        return d


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out: Path, command: str, config: dict, inputs: list) -> None:
    manifest = {
        "command": command,
        "version": __version__,
        "config": config,
        "inputs": {str(p): _sha256(Path(p)) for p in inputs},
    }
    (out / f"manifest_{command}.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _parse_days(text: str) -> list:
    try:
        days = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad horizon list {text!r}") from None
    if not days or any(d * SLOTS_PER_DAY < 1 for d in days):
        raise argparse.ArgumentTypeError("horizons must be positive (at least one half hour)")
    return days


def _run_config(args) -> RunConfig:
    run = RunConfig.load(args.config)
    if args.seed is not None:
        run = dataclasses.replace(run, train=dataclasses.replace(run.train, seed=args.seed))
    return run


def _out_dir(args, run: RunConfig) -> Path:
    out = Path(args.out or run.out_dir or "run")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _series_path(args, run: RunConfig, out: Path) -> Path:
    return Path(getattr(args, "series", None) or run.series or out / "series.csv")


def _checkpoint_path(args, run: RunConfig, out: Path) -> Path:
    if args.checkpoint:
        return Path(args.checkpoint)
    base = Path(run.checkpoint_dir) if run.checkpoint_dir else out / "checkpoints"
    return base / ("last.ckpt" if args.final_epoch else "best.ckpt")


def cmd_ingest(args) -> int:
    run = _run_config(args)
    out = _out_dir(args, run)
    layout = Layout(
        delimiter=args.delimiter,
        date_column=args.date_column,
        value_start=args.value_start,
        date_format=args.date_format,
        header=args.header,
    )
    raw = Path(args.raw)
    with open(raw, "rb") as fh:
        table = parse_table(fh, layout)
    series = flatten(table, args.gap_policy)
    target = Path(args.output) if args.output else out / "series.csv"
    write_series(series, target)
    _write_manifest(out, "ingest", {"layout": dataclasses.asdict(layout),
                                    "gap_policy": GapPolicy(args.gap_policy).value,
                                    "output": str(target)}, [raw])
    days = len(series) // SLOTS_PER_DAY
    print(f"points={len(series)} days={days} imputed={series.n_imputed}")
    return 0


def cmd_synth(args) -> int:
    run = _run_config(args)
    out = _out_dir(args, run)
    params = SynthParams(days=args.days, base=args.base, amplitude=args.amplitude,
                         weekly=args.weekly, noise=args.noise,
                         seed=run.train.seed if args.seed is not None else args.synth_seed,
                         start=args.start)
    series = synthesize(params)
    target = Path(args.output) if args.output else out / "series.csv"
    write_series(series, target)
    params_path = target.with_name(target.stem + "_params.json")
    params_path.write_text(json.dumps(params.to_dict(), indent=2, sort_keys=True) + "\n")
    _write_manifest(out, "synth", params.to_dict(), [])
    print(f"points={len(series)} days={params.days} written={target}")
    return 0


def cmd_train(args) -> int:
    run = _run_config(args)
    out = _out_dir(args, run)
    series_path = _series_path(args, run, out)
    series = read_series(series_path)
    config = run.train.with_split(run.train.resolve_split(len(series)))
    resolved = dataclasses.replace(run, train=config)
    _write_manifest(out, "train", resolved.to_dict(), [series_path])
    if args.dry_run:
        print(json.dumps(resolved.to_dict(), sort_keys=True))
        return 0
    ckpt_dir = Path(run.checkpoint_dir) if run.checkpoint_dir else out / "checkpoints"
    best, history = fit(series, config, ckpt_dir, keep_epoch_checkpoints=not args.best_only)
    (out / "history.csv").write_text(history_csv(history))
    print("best_epoch,val_mae_kwh,val_mape_pct")
    print(f"{best.epoch},{best.record.val_mae:.6g},{best.record.val_mape:.6g}")
    return 0


def _write_predictions(path: Path, timestamps, predicted, actual) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["timestamp", "predicted_kwh", "actual_kwh"])
    for ts, p, a in zip(timestamps, predicted, actual):
        writer.writerow([ts.isoformat(), repr(float(p)), repr(float(a))])
    path.write_text(buf.getvalue())


def cmd_evaluate(args) -> int:
    run = _run_config(args)
    out = _out_dir(args, run)
    ckpt_path = _checkpoint_path(args, run, out)
    series_path = _series_path(args, run, out)
    ckpt = load_checkpoint(ckpt_path)
    series = read_series(series_path)
    state = ckpt.state if ckpt.model.input_mode == "flat" else None
    val_mae, val_mape, preds = validate(ckpt.model, series, ckpt.config, ckpt.normalizer, state)
    split = ckpt.config.split
    _write_predictions(out / "validation.csv", series.timestamps(split.train_end, split.val_end),
                       preds, series.values[split.train_end : split.val_end])
    result = {"epoch": ckpt.epoch, "val_mae_kwh": val_mae, "val_mape_pct": val_mape,
              "n_points": split.val_end - split.train_end}
    (out / "evaluation.json").write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")
    _write_manifest(out, "evaluate", {"checkpoint": str(ckpt_path)}, [ckpt_path, series_path])
    print(f"epoch={ckpt.epoch} val_mae_kwh={val_mae:.6g} val_mape_pct={val_mape:.6g}")
    return 0


def cmd_forecast(args) -> int:
    run = _run_config(args)
    out = _out_dir(args, run)
    ckpt_path = _checkpoint_path(args, run, out)
    series_path = _series_path(args, run, out)
    ckpt = load_checkpoint(ckpt_path)
    series = read_series(series_path)
    days = args.horizon_days or list(run.horizons_days)
    horizons = [int(round(d * SLOTS_PER_DAY)) for d in days]
    results = horizon_sweep(ckpt, series, horizons)
    longest = max(results, key=lambda r: r.horizon)
    (out / "forecast.csv").write_text(longest.to_csv())
    rows = [r.metrics_dict() for r in results]
    (out / "metrics.json").write_text(json.dumps(rows, indent=2) + "\n")
    _write_manifest(out, "forecast", {"checkpoint": str(ckpt_path), "horizons_half_hours": horizons},
                    [ckpt_path, series_path])
    for r in rows:
        print(f"horizon={r['horizon_half_hours']} mae_kwh={r['mae_kwh']} mape_pct={r['mape_pct']} "
              f"excluded={r['excluded_zero_targets']}")
    return 0


def _sweep_one(series_path: str, config: TrainConfig, ckpt_dir: str, horizons: list):
    series = read_series(series_path)
    best, history = fit(series, config, ckpt_dir, keep_epoch_checkpoints=False)
    Path(ckpt_dir, "history.csv").write_text(history_csv(history))
    results = horizon_sweep(best, series, horizons) if horizons else []
    return best.epoch, best.record, [r.metrics_dict() for r in results]


def cmd_sweep(args) -> int:
    run = _run_config(args)
    out = _out_dir(args, run)
    series_path = _series_path(args, run, out)
    series = read_series(series_path)
    horizons = [int(round(d * SLOTS_PER_DAY)) for d in run.horizons_days]
    jobs = []
    for n in run.window_sizes:
        config = dataclasses.replace(run.train, window_size=int(n))
        config = config.with_split(config.resolve_split(len(series)))
        jobs.append((str(series_path), config, str(out / "sweep" / f"window_{n}"), horizons))
    _write_manifest(out, "sweep", run.to_dict(), [series_path])
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            results = list(pool.map(_sweep_one, *zip(*jobs)))
    else:
        results = [_sweep_one(*job) for job in jobs]

    summary = io.StringIO()
    writer = csv.writer(summary, lineterminator="\n")
    writer.writerow(["window_size", "best_epoch", "val_mae_kwh", "val_mape_pct"])
    horizon_rows = io.StringIO()
    hwriter = csv.writer(horizon_rows, lineterminator="\n")
    hwriter.writerow(["window_size", "horizon_half_hours", "mae_kwh", "mape_pct", "excluded_zero_targets"])
    for n, (epoch, record, metrics) in zip(run.window_sizes, results):
        writer.writerow([n, epoch, repr(record.val_mae), repr(record.val_mape)])
        for m in metrics:
            hwriter.writerow([n, m["horizon_half_hours"], m["mae_kwh"], m["mape_pct"],
                              m["excluded_zero_targets"]])
        print(f"window={n} best_epoch={epoch} val_mae_kwh={record.val_mae:.6g} "
              f"val_mape_pct={record.val_mape:.6g}")
    (out / "sweep.csv").write_text(summary.getvalue())
    (out / "sweep_horizons.csv").write_text(horizon_rows.getvalue())
    return 0


def build_parser() -> argparse.ArgumentParser:
    d = TrainConfig()
    parser = argparse.ArgumentParser(
        prog="ecfc",
        description="Half-hourly building energy forecasting with an LSTM.",
        epilog=(
            "Training defaults (override in the --config JSON): "
            f"batch_size={d.batch_size} epochs={d.epochs} learning_rate={d.learning_rate} "
            f"dropout_keep={d.dropout_keep} window_size={d.window_size} "
            f"layer_count={d.layer_count} units={d.units} input_mode={d.input_mode} "
            f"schema_variant={d.schema_variant} shuffle={d.shuffle} clip_norm={d.clip_norm} "
            f"beta1={d.beta1} beta2={d.beta2} adam_eps={d.adam_eps} zero_floor={d.zero_floor} "
            "split=null (train from index 0, hold out the last 10 days). "
            "Run keys: series, checkpoint_dir, out_dir, window_sizes=[48, 96], "
            "horizons_days=[2, 5, 10]."
        ),
    )
    parser.add_argument("--config", help="run configuration JSON (unknown keys are rejected)")
    parser.add_argument("--seed", type=int, help="overrides the config seed")
    parser.add_argument("--out", help="output directory (default: run)")
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-epoch progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse a day-per-row table into a series file")
    p.add_argument("raw")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--date-column", type=int, default=0)
    p.add_argument("--value-start", type=int, default=1, help="first of the 48 value columns")
    p.add_argument("--date-format", default="%Y-%m-%d", help="strptime pattern, e.g. %%d/%%m/%%Y")
    header = p.add_mutually_exclusive_group()
    header.add_argument("--header", dest="header", action="store_true", default=None)
    header.add_argument("--no-header", dest="header", action="store_false")
    p.add_argument("--gap-policy", choices=[g.value for g in GapPolicy], default="strict")
    p.add_argument("--output", help="series file (default: OUT/series.csv)")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="write a synthetic series with a known generator")
    p.add_argument("--days", type=int, default=60)
    p.add_argument("--base", type=float, default=100.0)
    p.add_argument("--amplitude", type=float, default=40.0)
    p.add_argument("--weekly", type=float, default=0.25, help="weekday modulation B")
    p.add_argument("--noise", type=float, default=None, help="noise sigma (default 2%% of amplitude)")
    p.add_argument("--start", default="2012-01-02")
    p.add_argument("--synth-seed", type=int, default=0)
    p.add_argument("--output", help="series file (default: OUT/series.csv)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train and write checkpoints plus history.csv")
    p.add_argument("--series")
    p.add_argument("--dry-run", action="store_true", help="validate the config and write the manifest only")
    p.add_argument("--best-only", action="store_true", help="skip per-epoch checkpoint files")
    p.set_defaults(func=cmd_train)

    for name, func, helptext in (
        ("evaluate", cmd_evaluate, "re-run feedback validation from a checkpoint"),
        ("forecast", cmd_forecast, "forecast one or more horizons after the training range"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--checkpoint")
        p.add_argument("--series")
        p.add_argument("--final-epoch", action="store_true",
                       help="use last.ckpt instead of best.ckpt")
        if name == "forecast":
            p.add_argument("--horizon-days", type=_parse_days,
                           help="comma-separated horizons in days, e.g. 10,20,30")
        p.set_defaults(func=func)

    p = sub.add_parser("sweep", help="train once per window size and tabulate")
    p.add_argument("--series")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ContractError) as exc:
        print(f"ecfc: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, BoundsError, UndefinedMetricError) as exc:
        print(f"ecfc: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (CheckpointError, OSError) as exc:
        print(f"ecfc: i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
