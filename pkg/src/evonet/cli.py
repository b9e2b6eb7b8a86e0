"""``evonet`` command-line interface.

Subcommands::

    evonet gen-data   write a benchmark dataset (CSV + JSON sidecar)
    evonet evolve     evolutionary search with local training, repeated runs
    evonet baseline   fixed-architecture networks trained from random weights
    evonet train      train one network of a given architecture
    evonet report     merge experiment directories into one comparison table

Settings resolve as command-line flags, then ``--config`` file, then defaults.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .datasets import DATASETS, DatasetError, build_dataset, normalize, write_dataset
from .harness import (
    ExperimentConfig,
    build_report,
    read_config_file,
    resolve_config,
    run_baseline,
    run_evolve,
    run_train,
)
from .network import ARCHITECTURE_GRAMMAR


def _experiment_args(p: argparse.ArgumentParser, *, evolution: bool) -> None:
    # every default is None so that only flags actually given override the config file
    p.add_argument("--config", help="flat key = value file with experiment settings")
    p.add_argument("--dataset", choices=DATASETS, help="benchmark problem (default: mackey)")
    p.add_argument("--data", help="dataset CSV from gen-data, or a raw series for gas/wastewater")
    p.add_argument("--seed", type=int, help="master random seed (default: 0)")
    p.add_argument("--out", help="artifact directory")
    p.add_argument("--repetitions", type=int, help="independent repetitions; worst is reported (default: 3)")
    p.add_argument("--trainer", action="append", dest="trainers", metavar="KIND",
                   help="bp, scg, qna, lm" + (" or evolved" if evolution else "")
                   + "; repeat or comma-separate (default: all four)")
    p.add_argument("-q", "--quiet", action="store_true", help="suppress progress output")
    if evolution:
        p.add_argument("--population", dest="population_size", type=int, help="population size (40)")
        p.add_argument("--generations", dest="max_generations", type=int, help="generation limit (40)")
        p.add_argument("--max-hidden", type=int, help="largest hidden layer (16)")
        p.add_argument("--epochs", dest="epochs_per_eval", type=int, help="training epochs per evaluation (500)")
        p.add_argument("--elitism", dest="elitism_fraction", type=float, help="elite fraction (0.05)")
        p.add_argument("--selection", dest="selection_fraction", type=float, help="parent pool fraction (0.50)")
        p.add_argument("--mutation", dest="mutation_rate", type=float, help="per-segment mutation rate (0.40)")
        p.add_argument("--fitness-split", choices=("test", "holdout"), help="set scored for fitness (test)")
        p.add_argument("--target-rmse", type=float, help="stop once the best fitness reaches this")
        p.add_argument("--writeback", choices=("lamarckian", "baldwinian"), help="keep trained weights (lamarckian)")
        p.add_argument("--workers", type=int, help="parallel evaluation processes (1)")
    else:
        p.add_argument("--architecture", dest="baseline_architecture",
                       help='hidden layer, e.g. "24 T*" (default)')
        p.add_argument("--epochs", dest="baseline_epochs", type=int, help="training epochs (2500)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evonet", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="write a benchmark dataset")
    g.add_argument("--dataset", choices=DATASETS, default="mackey")
    g.add_argument("--data", help="raw series (gas, wastewater)")
    g.add_argument("--tau", type=float, default=17.0, help="Mackey-Glass delay")
    g.add_argument("--dt", type=float, default=0.1, help="RK4 step")
    g.add_argument("--x0", type=float, default=1.2, help="initial value")
    g.add_argument("--data-seed", type=int, default=0, help="seed for the synthetic surrogates")
    g.add_argument("--normalize", action="store_true", help="write [0, 1]-normalised columns")
    g.add_argument("--out", required=True, help="output CSV path (sidecar: same name, .json)")

    e = sub.add_parser("evolve", help="evolve networks and trainers")
    _experiment_args(e, evolution=True)

    b = sub.add_parser("baseline", help="train a fixed architecture from random weights")
    _experiment_args(b, evolution=False)

    t = sub.add_parser("train", help="train one network")
    t.add_argument("architecture", help=ARCHITECTURE_GRAMMAR)
    t.add_argument("--trainer", default="lm", help="bp, scg, qna or lm")
    t.add_argument("--epochs", type=int, default=500)
    t.add_argument("--param", action="append", default=[], metavar="NAME=VALUE",
                   help="trainer hyperparameter, e.g. mu_init=0.005")
    t.add_argument("--dataset", choices=DATASETS, default="mackey")
    t.add_argument("--data")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--trace", default="train_trace.csv", help="epoch-RMSE CSV path")

    r = sub.add_parser("report", help="merge artifacts into a comparison table")
    r.add_argument("sources", nargs="+", help="artifact directories or merged report CSVs")
    r.add_argument("--csv", help="also write the merged table as CSV")
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    skip = {"command", "config", "quiet"}
    d = {k: v for k, v in vars(args).items() if k not in skip and v is not None}
    if "trainers" in d:
        d["trainers"] = tuple(t.strip() for item in d["trainers"] for t in item.split(",") if t.strip())
    return d


def _progress(args):
    if getattr(args, "quiet", False):
        return lambda msg: None
    return lambda msg: print(msg, file=sys.stderr, flush=True)


def cmd_gen_data(args) -> int:
    ds = build_dataset(args.dataset, args.data, dt=args.dt, tau=args.tau, x0=args.x0, seed=args.data_seed)
    if args.normalize:
        ds = normalize(ds)
    csv_path, sidecar = write_dataset(ds, args.out)
    print(f"{ds.name}: {ds.n_patterns} patterns, {ds.n_inputs} inputs, split {ds.split_index} "
          f"-> {csv_path} (+ {sidecar.name})")
    return 0


def _experiment(args) -> ExperimentConfig:
    file_values = read_config_file(args.config) if args.config else {}
    return resolve_config(file_values, _overrides(args))


def cmd_evolve(args) -> int:
    cfg = _experiment(args)
    run_evolve(cfg, _progress(args))
    print((Path(cfg.out) / "summary.txt").read_text(encoding="utf-8"), end="")
    print(f"seed {cfg.seed}; artifacts in {cfg.out}")
    return 0


def cmd_baseline(args) -> int:
    cfg = _experiment(args)
    run_baseline(cfg, _progress(args))
    print((Path(cfg.out) / "summary.txt").read_text(encoding="utf-8"), end="")
    print(f"seed {cfg.seed}; artifacts in {cfg.out}")
    return 0


def cmd_train(args) -> int:
    params = {}
    for item in args.param:
        name, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"--param expects NAME=VALUE, got {item!r}")
        params[name.strip()] = float(value)
    cfg = ExperimentConfig(dataset=args.dataset, data=args.data, seed=args.seed)
    info = run_train(cfg, args.architecture, args.trainer, args.epochs, params, args.trace)
    print(json.dumps(info, indent=2))
    return 0


def cmd_report(args) -> int:
    table = build_report(args.sources)
    if table.rows:
        print(table.render())
    if args.csv:
        Path(args.csv).write_text(table.to_csv(), encoding="utf-8")
    for err in table.errors:
        print(f"error: {err}", file=sys.stderr)
    return 1 if table.errors or not table.rows else 0


COMMANDS = {
    "gen-data": cmd_gen_data,
    "evolve": cmd_evolve,
    "baseline": cmd_baseline,
    "train": cmd_train,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (DatasetError, ValueError, OSError) as exc:
        print(f"evonet {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
