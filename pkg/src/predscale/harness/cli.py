"""Command line: ``predscale {run,gen-trace,gen-dataset,train,report}``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .. import trace as tr
from ..forecast import modelio
from ..forecast.dataset import make_windows, series_from_text, series_to_text, synthetic_series
from ..forecast.defaults import MLP_WIDTHS, initial_params
from ..forecast.train import Dataset, TrainConfig, train
from .report import format_table, read_percentiles
from .scenario import load as load_scenario

logger = logging.getLogger("predscale")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip())


def cmd_run(args) -> int:
    from .runner import run

    scenario = load_scenario(args.scenario)
    if args.output:
        from dataclasses import replace

        scenario = replace(scenario, output=args.output)
    out = run(scenario)
    print(out)
    return 0


def cmd_gen_trace(args) -> int:
    if args.shape == "ramp":
        t = tr.ramp(args.base, args.peak, args.t0, args.t1, args.duration, args.power)
    elif args.shape == "step":
        t = tr.step(args.low, args.high, args.t0, args.duration)
    else:
        amps = _floats(args.amplitudes)
        t = tr.sin_mix(args.base, amps, _floats(args.periods), args.duration, _floats(args.phases) if args.phases else None)
    t.save(args.output)
    return 0


def cmd_gen_dataset(args) -> int:
    rng = np.random.default_rng(args.seed)
    series = [synthetic_series(rng, args.length, args.ceiling) for _ in range(args.series)]
    Path(args.output).write_text(series_to_text(series))
    return 0


def cmd_train(args) -> int:
    series = series_from_text(Path(args.dataset).read_text())
    if len(series) < 2:
        raise ValueError("need at least two series (one is held out for validation)")
    n_val = max(1, int(round(args.val_fraction * len(series))))
    X_tr, y_tr = make_windows(series[n_val:], args.window, args.horizon)
    X_va, y_va = make_windows(series[:n_val], args.window, args.horizon)
    if len(y_tr) == 0 or len(y_va) == 0:
        raise ValueError(f"series too short for window {args.window} + horizon {args.horizon}")
    train_set = Dataset(X_tr / args.scale, y_tr / args.scale, "train")
    val_set = Dataset(X_va / args.scale, y_va / args.scale, "validation")
    cfg = TrainConfig(
        learning_rate=args.lr, momentum=args.momentum, validation_check_every=args.check_every,
        patience=args.patience, max_steps=args.max_steps, batch_size=args.batch_size, rng_seed=args.seed,
    )
    if args.window != MLP_WIDTHS[0] and args.model == "mlp":
        from ..forecast.nets import MlpParams

        p0 = MlpParams.init((args.window,) + MLP_WIDTHS[1:], seed=args.seed)
    else:
        p0 = initial_params(args.model, train_set, args.seed)
    best, hist = train(p0, train_set, val_set, cfg)
    modelio.save(best, args.output)
    print(f"best validation loss {hist.best_val_loss:.6g} at step {hist.best_step} of {hist.steps_run}")
    return 0


def cmd_report(args) -> int:
    dirs = [Path(d) for d in args.artifacts]
    pct = {}
    for d in dirs:
        if (d / "percentiles.csv").exists():
            pct[d] = read_percentiles(d / "percentiles.csv")
    if pct:
        col = args.window
        names = [json.loads((d / "summary.json").read_text())["policy"] if (d / "summary.json").exists() else d.name for d in pct]
        stats = list(next(iter(pct.values())))
        rows = [[s] + [pct[d][s].get(f"{col}_ms", float("nan")) for d in pct] for s in stats]
        print(f"Response times (ms), {col}")
        print(format_table(["statistic"] + names, rows))
    rows = []
    for d in dirs:
        if (d / "overhead.csv").exists():
            with open(d / "overhead.csv", newline="") as fh:
                for r in csv.DictReader(fh):
                    rows.append([r["model"], float(r["forecasting_time_ms"]), float(r["total_time_ms"])])
    if rows:
        print("\nForecasting overhead per activation (ms)")
        print(format_table(["model", "forecasting time", "total time"], rows))
    if not pct and not rows:
        raise FileNotFoundError("no percentiles.csv or overhead.csv in the given directories")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="predscale", description="Predictive autoscaling experiments")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario file")
    p.add_argument("scenario", type=Path)
    p.add_argument("-o", "--output", type=Path, help="override the scenario's output directory")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("gen-trace", help="write a workload trace (requests/s per thread, one per line)")
    p.add_argument("shape", choices=("ramp", "step", "sin-mix"))
    p.add_argument("-o", "--output", type=Path, required=True)
    p.add_argument("--duration", type=int, default=90, help="minutes")
    p.add_argument("--base", type=float, default=6.0)
    p.add_argument("--peak", type=float, default=40.0)
    p.add_argument("--t0", type=int, default=50)
    p.add_argument("--t1", type=int, default=80)
    p.add_argument("--power", type=float, default=1.3)
    p.add_argument("--low", type=float, default=6.0)
    p.add_argument("--high", type=float, default=30.0)
    p.add_argument("--amplitudes", default="0", help="comma-separated")
    p.add_argument("--periods", default="60", help="comma-separated, minutes")
    p.add_argument("--phases", default="", help="comma-separated, radians")
    p.set_defaults(func=cmd_gen_trace)

    p = sub.add_parser("gen-dataset", help="write synthetic training series")
    p.add_argument("-o", "--output", type=Path, required=True)
    p.add_argument("--series", type=int, default=60)
    p.add_argument("--length", type=int, default=240)
    p.add_argument("--ceiling", type=float, default=500.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen_dataset)

    p = sub.add_parser("train", help="train a forecaster on a series file")
    p.add_argument("dataset", type=Path)
    p.add_argument("--model", choices=("mlp", "rnn"), required=True)
    p.add_argument("-o", "--output", type=Path, required=True)
    p.add_argument("--window", type=int, default=20)
    p.add_argument("--horizon", type=int, default=15)
    p.add_argument("--scale", type=float, default=500.0)
    p.add_argument("--val-fraction", type=float, default=0.2)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--check-every", type=int, default=50)
    p.add_argument("--patience", type=int, default=40)
    p.add_argument("--max-steps", type=int, default=20000)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("report", help="print response-time and overhead tables")
    p.add_argument("artifacts", nargs="+", type=Path)
    p.add_argument("--window", choices=("window", "full"), default="window")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Exception as exc:  # every module error becomes a diagnostic and exit 1
        logger.debug("failure", exc_info=True)
        print(f"predscale {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
