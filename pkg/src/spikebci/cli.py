"""Command-line front end for all experiments.

Subcommands: train-offline, closed-loop, memory, ablate. Every run writes
machine-readable CSVs plus a JSON summary carrying the resolved config, its
hash, and the seeds; identical arguments and seeds reproduce byte-identical
CSVs (timestamps live only in the summary). Exit codes: 0 success, 1 runtime
failure, 2 configuration error. SPIKEBCI_OUT overrides the output directory.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .closedloop import (
    ClosedLoopConfig,
    run_disruption_protocol,
    run_nopretrain_protocol,
)
from .config import ConfigError
from .datasets import DatasetFormatError, load_dataset, make_synthetic_offline_dataset
from .memory import measure_bptt_aux_bytes, measure_online_aux_bytes, memory_model
from .network import Architecture
from .training import config_hash, run_ablation, train_offline

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


def parse_seeds(text: str) -> list[int]:
    """Accept '1,2,3' or inclusive ranges like '1..10'."""
    text = text.strip()
    if not text:
        raise ConfigError("seed list is empty")
    if ".." in text:
        lo, _, hi = text.partition("..")
        try:
            lo_i, hi_i = int(lo), int(hi)
        except ValueError as exc:
            raise ConfigError(f"bad seed range {text!r}") from exc
        if hi_i < lo_i:
            raise ConfigError(f"empty seed range {text!r}")
        return list(range(lo_i, hi_i + 1))
    try:
        return [int(s) for s in text.split(",")]
    except ValueError as exc:
        raise ConfigError(f"bad seed list {text!r}") from exc


def _out_dir(args) -> Path:
    out = os.environ.get("SPIKEBCI_OUT", args.out)
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_csv(path: Path, rows: list[dict], columns: list[str]) -> None:
    with path.open("w", newline="\n", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])


def _fmt(value):
    if isinstance(value, (np.floating, float)):
        return repr(float(value))
    if isinstance(value, (np.integer, int)):
        return int(value)
    return value


def write_summary(path: Path, command: str, cfg: dict, seeds: list[int], outputs: list[str]) -> None:
    summary = {
        "command": command,
        "config": cfg,
        "config_hash": config_hash(cfg),
        "seeds": seeds,
        "outputs": outputs,
        "written_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _load_or_make_dataset(args, bin_ms: float):
    if args.dataset:
        return load_dataset(args.dataset)
    if args.synthetic:
        return make_synthetic_offline_dataset(args.synthetic, seed=args.data_seed,
                                              bin_ms=bin_ms)
    raise ConfigError("provide --dataset PATH or --synthetic N_BINS")


def _build(fn, *fn_args):
    """Dataclass construction errors at config time are config errors."""
    try:
        return fn(*fn_args)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_train_offline(args) -> int:
    cfg = cfgmod.load_config(cfgmod.offline_defaults(), args.config, args.set or [])
    if args.epochs is not None:
        cfg["train"]["epochs"] = args.epochs
    seeds = parse_seeds(args.seeds)
    arch, lif, pcfg, tcfg, _ = _build(cfgmod.build_offline, cfg, args.mode)
    dataset = _load_or_make_dataset(args, cfg["bin_ms"])
    if dataset.n_channels != arch.n_in:
        arch = Architecture(dataset.n_channels, arch.n_h1, arch.n_h2, arch.n_out,
                            recurrent=arch.recurrent)
    out = _out_dir(args)
    rows = []
    for seed in seeds:
        result = train_offline(dataset, args.mode, seed, arch, lif, pcfg, tcfg)
        for rec in result.records:
            rows.append({"seed": seed, **rec})
        print(f"seed {seed}: R_x={result.r_x:.4f} R_y={result.r_y:.4f}")
    curve = out / "learning_curve.csv"
    write_csv(curve, rows, ["seed", "epoch", "samples", "r_x", "r_y"])
    write_summary(out / "summary.json", "train-offline", cfg, seeds, [str(curve)])
    return EXIT_OK


def cmd_closed_loop(args) -> int:
    cfg = cfgmod.load_config(cfgmod.closed_loop_defaults(), args.config, args.set or [])
    seeds = parse_seeds(args.seeds)
    ccfg = _build(cfgmod.build_closed_loop, cfg, args.protocol, args.disruption, args.intensity)
    out = _out_dir(args)
    rows = []
    for seed in seeds:
        if args.protocol == "disruption":
            rows += run_disruption_protocol(ccfg, seed)
        else:
            rows += run_nopretrain_protocol(ccfg, seed)
        print(f"seed {seed}: done")
    trials = out / "trials.csv"
    write_csv(trials, rows, ["seed", "decoder", "phase", "trial", "steps", "time_s", "success"])
    write_summary(out / "summary.json", f"closed-loop/{args.protocol}", cfg, seeds, [str(trials)])
    return EXIT_OK


def cmd_memory(args) -> int:
    if args.timesteps < 1:
        raise ConfigError("--timesteps must be >= 1")
    arch = _build(Architecture.parse, args.arch)
    report = memory_model(arch, args.timesteps)
    info = report.as_dict()
    for key, value in info.items():
        print(f"{key}: {value:.4f}" if isinstance(value, float) else f"{key}: {value}")
    if args.measure:
        info["measured_online_bytes"] = measure_online_aux_bytes(arch, args.timesteps)
        info["measured_bptt_bytes"] = measure_bptt_aux_bytes(arch, args.timesteps)
        print(f"measured_online_bytes: {info['measured_online_bytes']}")
        print(f"measured_bptt_bytes: {info['measured_bptt_bytes']}")
    out = _out_dir(args)
    table = out / "memory.csv"
    write_csv(table, [info], list(info.keys()))
    write_summary(out / "summary.json", "memory",
                  {"arch": args.arch, "timesteps": args.timesteps}, [], [str(table)])
    return EXIT_OK


def cmd_ablate(args) -> int:
    cfg = cfgmod.load_config(cfgmod.offline_defaults(), args.config, args.set or [])
    if args.epochs is not None:
        cfg["train"]["epochs"] = args.epochs
    seeds = parse_seeds(args.seeds)
    variants = [v.strip() for v in args.variants.split(",") if v.strip()]
    if not variants:
        raise ConfigError("variant list is empty")
    arch, lif, pcfg, tcfg, _ = _build(cfgmod.build_offline, cfg, "batched")
    dataset = _load_or_make_dataset(args, cfg["bin_ms"])
    if dataset.n_channels != arch.n_in:
        arch = Architecture(dataset.n_channels, arch.n_h1, arch.n_h2, arch.n_out,
                            recurrent=arch.recurrent)
    try:
        rows = run_ablation(variants, dataset, seeds, arch, lif, pcfg, tcfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out = _out_dir(args)
    table = out / "ablation.csv"
    write_csv(table, rows, ["variant", "seed", "r_x", "r_y"])
    write_summary(out / "summary.json", "ablate", cfg, seeds, [str(table)])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spikebci",
        description="Online-adaptive SNN decoder experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file overriding the defaults")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="dotted config override, repeatable")
        p.add_argument("--seeds", default="0", help="comma list or inclusive range like 1..10")
        p.add_argument("--out", default="results", help="output directory")

    def dataset_args(p):
        p.add_argument("--dataset", help="path to a binned dataset CSV")
        p.add_argument("--synthetic", type=int, metavar="N_BINS",
                       help="generate a synthetic dataset with this many bins")
        p.add_argument("--data-seed", type=int, default=7,
                       help="seed for synthetic dataset generation")

    p = sub.add_parser("train-offline", help="train the online decoder on a binned dataset")
    common(p)
    dataset_args(p)
    p.add_argument("--mode", choices=["batched", "timestepwise"], default="batched")
    p.add_argument("--epochs", type=int, help="override the configured epoch count")
    p.set_defaults(func=cmd_train_offline)

    p = sub.add_parser("closed-loop", help="run a closed-loop reach protocol")
    common(p)
    p.add_argument("--protocol", choices=["disruption", "nopretrain"], required=True)
    p.add_argument("--disruption", choices=["remap", "drift", "dropout"], default="remap")
    p.add_argument("--intensity", type=float, default=0.9)
    p.set_defaults(func=cmd_closed_loop)

    p = sub.add_parser("memory", help="print the analytic memory model")
    p.add_argument("--arch", required=True, help="sizes like 96-256-128-2")
    p.add_argument("--timesteps", type=int, required=True)
    p.add_argument("--measure", action="store_true",
                   help="also measure instrumented online and BPTT peaks")
    p.add_argument("--out", default="results")
    p.set_defaults(func=cmd_memory)

    p = sub.add_parser("ablate", help="run learning-rule ablation variants")
    common(p)
    dataset_args(p)
    p.add_argument("--variants", required=True,
                   help="comma list, e.g. delta,frozen,dual,slow_only")
    p.add_argument("--epochs", type=int, help="override the configured epoch count")
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DatasetFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
