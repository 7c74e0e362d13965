"""Command-line front door.

Subcommands: ``spectra`` (stage-by-stage spectrum CSVs), ``roc``
(impairment-sweep ROC table), ``calibrate`` (per-channel thresholds with
held-out achieved Pfa), ``detect`` (offline detection on a recorded IQ
file), and ``record`` (synthesize a recording from a config).

All outputs are deterministic functions of (config file, seed) and are
written atomically (temp file, then rename).  Exit codes: 0 success,
2 config error, 3 data error, 4 precision error.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path

import numpy as np

from . import plots
from .config import ConfigError, load_config
from .detector import ThresholdVector, channelize, decide
from .experiments import (
    STAGE_NAMES,
    PrecisionError,
    calibrate_threshold,
    psd_stages,
    run_trials,
    sweep_impairment,
    trial_stream,
    wilson_interval,
)
from .iqfile import DataError, iter_windows, read_header, write_recording
from .rf_frontend import front_end_chain
from .signal_model import add_awgn, generate_signal

__all__ = ["main"]


def _write_csv(path, header, rows):
    tmp = str(path) + ".tmp"
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    os.replace(tmp, path)
    print(f"wrote {path}")


def _out_dir(args) -> Path:
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(args):
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def cmd_spectra(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    stages = psd_stages(cfg.scenario, cfg.impairments, cfg.n_avg, cfg.seed)
    order = np.argsort(stages.frequencies)
    freqs = stages.frequencies[order]
    for name in STAGE_NAMES:
        level_db = plots.power_db(stages.power[name][order])
        _write_csv(out / f"spectra_{name}.csv", ("freq_hz", "power_db"),
                   zip(freqs, level_db))
    if not args.no_figures:
        plots.save_spectra_figure(stages, out / "spectra.png")
        print(f"wrote {out / 'spectra.png'}")
    return 0


def cmd_roc(args) -> int:
    cfg = _load(args).require("n_trials", "channel_under_test", "sweep")
    out = _out_dir(args)
    table = sweep_impairment(
        cfg.scenario, cfg.impairments,
        cfg.sweep.parameter, cfg.sweep.values, cfg.target_pfa_grid,
        cfg.channel_under_test, cfg.n_trials, cfg.seed,
        workers=args.workers,
    )
    rows = []
    for value, curve in sorted(table, key=lambda item: item[0]):
        for p in curve.points:
            rows.append((value, p.threshold, p.pfa, p.pfa_lo, p.pfa_hi,
                         p.pd, p.pd_lo, p.pd_hi))
    _write_csv(out / "roc.csv",
               ("param_value", "lambda", "pfa", "pfa_lo", "pfa_hi",
                "pd", "pd_lo", "pd_hi"),
               rows)
    if not args.no_figures:
        plots.save_roc_figure(table, cfg.sweep.parameter, out / "roc.png")
        print(f"wrote {out / 'roc.png'}")
    return 0


def cmd_calibrate(args) -> int:
    cfg = _load(args).require("n_trials", "target_pfa")
    out = _out_dir(args)
    scenario, imp = cfg.scenario, cfg.impairments
    idle = [k for k in scenario.plan.channels
            if not scenario.occupancy.is_occupied(k)]
    if not idle:
        raise ConfigError("calibrate needs at least one idle channel in the occupancy")
    cal = run_trials(scenario, imp, cfg.n_trials, cfg.seed,
                     start_trial=0, workers=args.workers)
    holdout = run_trials(scenario, imp, cfg.n_trials, cfg.seed,
                         start_trial=cfg.n_trials, workers=args.workers)
    rows = []
    for channel in idle:
        lam = calibrate_threshold(cal, channel, cfg.target_pfa)
        exceed = int(np.count_nonzero(holdout.energies_for(channel) > lam))
        lo, hi = wilson_interval(exceed, holdout.n_trials)
        rows.append((channel, cfg.target_pfa, lam,
                     exceed / holdout.n_trials, lo, hi))
    _write_csv(out / "thresholds.csv",
               ("channel", "target_pfa", "lambda",
                "achieved_pfa", "achieved_lo", "achieved_hi"),
               rows)
    return 0


def _read_thresholds(path) -> dict:
    try:
        with open(path, "r", newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or \
                    not {"channel", "lambda"} <= set(reader.fieldnames):
                raise DataError(
                    f"thresholds file {path} must have 'channel' and 'lambda' columns")
            out = {}
            for i, row in enumerate(reader):
                try:
                    out[int(row["channel"])] = float(row["lambda"])
                except (TypeError, ValueError):
                    raise DataError(
                        f"thresholds file {path}: bad row {i + 1}: {row}") from None
    except FileNotFoundError:
        raise DataError(f"thresholds file not found: {path}") from None
    if not out:
        raise DataError(f"thresholds file {path} has no rows")
    return out


def cmd_detect(args) -> int:
    header = read_header(args.recording)
    plan = header.plan()
    thresholds = _read_thresholds(args.thresholds)
    missing = [k for k in plan.channels if k not in thresholds]
    if missing:
        raise DataError(f"thresholds file missing channel(s): {missing}")
    tv = ThresholdVector(plan.channels,
                         [thresholds[k] for k in plan.channels])
    out = _out_dir(args)
    path = out / "decisions.csv"
    tmp = str(path) + ".tmp"
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("window_index", "channel", "energy", "lambda", "decision"))
        for index, window in enumerate(iter_windows(args.recording, header)):
            energies = channelize(window, plan)
            decisions = decide(energies, tv)
            for k, energy, lam, busy in zip(plan.channels, energies.values,
                                            tv.values, decisions.busy):
                writer.writerow((index, k, energy, lam,
                                 "busy" if busy else "idle"))
    os.replace(tmp, path)
    print(f"wrote {path}")
    return 0


def cmd_record(args) -> int:
    cfg = _load(args)
    scenario, imp = cfg.scenario, cfg.impairments
    out_path = Path(args.output)
    if out_path.parent and not out_path.parent.exists():
        out_path.parent.mkdir(parents=True, exist_ok=True)

    def windows():
        for w in range(args.windows):
            rng = trial_stream(cfg.seed, w)
            sig = generate_signal(scenario, rng)
            sig = add_awgn(sig, scenario.noise_psd, scenario.plan, rng)
            yield front_end_chain(sig, imp, rng)

    count = write_recording(out_path, windows(), scenario.plan)
    print(f"wrote {out_path} ({count} windows)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crsense",
        description="Multi-channel energy-detection sensing under "
                    "direct-conversion receiver impairments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, workers=False, figures=False):
        sp.add_argument("config", help="JSON experiment config")
        sp.add_argument("-o", "--output-dir", default=".",
                        help="directory for output files (default: .)")
        sp.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
        if workers:
            sp.add_argument("--workers", default=None,
                            help="trial workers (default: $CRSENSE_WORKERS or 1)")
        if figures:
            sp.add_argument("--no-figures", action="store_true",
                            help="emit CSV data only, skip the PNG figure")

    sp = sub.add_parser("spectra", help="per-stage spectrum CSVs and figure")
    common(sp, figures=True)
    sp.set_defaults(func=cmd_spectra)

    sp = sub.add_parser("roc", help="impairment-sweep ROC table and figure")
    common(sp, workers=True, figures=True)
    sp.set_defaults(func=cmd_roc)

    sp = sub.add_parser("calibrate",
                        help="per-channel thresholds with held-out achieved Pfa")
    common(sp, workers=True)
    sp.set_defaults(func=cmd_calibrate)

    sp = sub.add_parser("detect", help="offline detection on a recorded IQ file")
    sp.add_argument("recording", help="IQ file (sidecar header expected next to it)")
    sp.add_argument("thresholds", help="thresholds CSV from the calibrate command")
    sp.add_argument("-o", "--output-dir", default=".")
    sp.set_defaults(func=cmd_detect)

    sp = sub.add_parser("record", help="synthesize an IQ recording from a config")
    sp.add_argument("config")
    sp.add_argument("output", help="output IQ file path")
    sp.add_argument("--windows", type=int, default=64,
                    help="number of DFT windows to record (default: 64)")
    sp.add_argument("--seed", type=int, default=None)
    sp.set_defaults(func=cmd_record)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except PrecisionError as exc:
        print(f"precision error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
