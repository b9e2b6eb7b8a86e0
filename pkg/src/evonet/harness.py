"""Experiment runner behind the command-line interface.

An experiment directory is self-describing::

    config.json                      resolved ExperimentConfig per command (seed included)
    summary.txt / summary.csv        one row per (method, trainer), worst repetition
    reports/<method>_<trainer>_rep<r>.json
    trace_<trainer>_rep<r>.csv       generation, population-mean test RMSE
    best_genome_<trainer>.json       best genome of every repetition
    predictions_<method>_<trainer>.csv   desired vs predicted on the test split

``report`` merges any number of these directories (or previously merged CSV
files) into one comparison table.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .datasets import SupervisedDataset, build_dataset, normalize, read_dataset
from .evolution import EvolutionConfig, evolve_dataset
from .network import NetworkShape, format_architecture, parse_architecture, predict, random_network, rmse
from .trainers import TrainerKind, TrainerSpec, train

EVOLVED = "evolved"
HYBRID = "hybrid"
BASELINE = "baseline"
SUMMARY_COLUMNS = ("dataset", "method", "trainer", "train_rmse", "test_rmse", "architecture",
                   "repetition", "seed")


@dataclass
class ExperimentConfig:
    """Everything needed to rerun an experiment; mirrored by the key=value config file."""

    dataset: str = "mackey"
    data: str | None = None
    dt: float = 0.1
    tau: float = 17.0
    x0: float = 1.2
    data_seed: int = 0
    trainers: tuple[str, ...] = ("bp", "scg", "qna", "lm")
    population_size: int = 40
    max_generations: int = 40
    max_hidden: int = 16
    epochs_per_eval: int = 500
    elitism_fraction: float = 0.05
    selection_fraction: float = 0.50
    mutation_rate: float = 0.40
    fitness_split: str = "test"
    target_rmse: float | None = None
    writeback: str = "lamarckian"
    workers: int = 1
    seed: int = 0
    repetitions: int = 3
    baseline_architecture: str = "24 T*"
    baseline_epochs: int = 2500
    out: str = "runs/experiment"

    def __post_init__(self):
        if isinstance(self.trainers, str):
            self.trainers = tuple(t.strip() for t in self.trainers.split(",") if t.strip())
        self.trainers = tuple(t.lower() for t in self.trainers)
        if not self.trainers:
            raise ValueError("at least one trainer is required")
        for t in self.trainers:
            if t != EVOLVED:
                TrainerKind.parse(t)
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")
        if self.baseline_epochs < 0:
            raise ValueError("baseline_epochs must be non-negative")
        parse_architecture(self.baseline_architecture)

    def evolution_config(self, trainer: str, repetition: int) -> EvolutionConfig:
        return EvolutionConfig(
            population_size=self.population_size,
            max_generations=self.max_generations,
            max_hidden=self.max_hidden,
            epochs_per_eval=self.epochs_per_eval,
            elitism_fraction=self.elitism_fraction,
            selection_fraction=self.selection_fraction,
            mutation_rate=self.mutation_rate,
            fitness_split=self.fitness_split,
            fixed_trainer=None if trainer == EVOLVED else TrainerKind.parse(trainer),
            target_rmse=self.target_rmse,
            seed=repetition_seed(self.seed, repetition),
            writeback=self.writeback,
            workers=self.workers,
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["trainers"] = list(self.trainers)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown configuration keys: {', '.join(sorted(unknown))}")
        d = dict(d)
        if isinstance(d.get("trainers"), list):
            d["trainers"] = tuple(d["trainers"])
        return cls(**d)


def repetition_seed(seed: int, repetition: int) -> int:
    """Independent, reproducible seed for one repetition."""
    return int(np.random.SeedSequence([seed, repetition]).generate_state(1)[0])


# --- config files --------------------------------------------------------------

def _coerce(name: str, raw: str):
    types = {f.name: f.type for f in fields(ExperimentConfig)}
    if name not in types:
        raise ValueError(f"unknown configuration key {name!r}")
    t = str(types[name])
    text = raw.strip()
    if "None" in t and text.lower() in ("", "none", "null"):
        return None
    if t.startswith("int"):
        return int(text)
    if t.startswith("float"):
        return float(text)
    if t.startswith("tuple"):
        return tuple(x.strip() for x in text.split(",") if x.strip())
    return text


def read_config_file(path) -> dict:
    """Parse a flat ``key = value`` file (``#`` comments, blank lines ignored)."""
    path = Path(path)
    out = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        try:
            out[key] = _coerce(key, value)
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from None
    return out


def write_config_file(cfg: ExperimentConfig, path) -> None:
    lines = []
    for k, v in cfg.to_dict().items():
        if isinstance(v, list):
            v = ",".join(v)
        lines.append(f"{k} = {'none' if v is None else v}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def resolve_config(file_values: dict | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Defaults, then config-file values, then explicitly given command-line flags."""
    merged = {}
    merged.update(file_values or {})
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return ExperimentConfig.from_dict(merged)


# --- datasets -------------------------------------------------------------------

def load_dataset(cfg: ExperimentConfig) -> SupervisedDataset:
    """Normalised dataset for an experiment.

    ``cfg.data`` may name either a file written by ``gen-data`` (recognised by
    its JSON sidecar) or a raw series for ``gas``/``wastewater``.
    """
    path = Path(cfg.data) if cfg.data else None
    if path is not None and path.with_suffix(".json").exists() and path.suffix != ".json":
        ds = read_dataset(path)
    else:
        ds = build_dataset(cfg.dataset, path, dt=cfg.dt, tau=cfg.tau, x0=cfg.x0, seed=cfg.data_seed)
    return ds if ds.normalization is not None else normalize(ds)


# --- artifacts ------------------------------------------------------------------

def _fmt(v: float) -> str:
    return repr(float(v))


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow(r)


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _write_predictions(path: Path, ds: SupervisedDataset, predicted) -> None:
    test = ds.test
    norm = ds.normalization
    pred = np.asarray(predicted, dtype=np.float64)
    raw_t = norm.denormalize_targets(test.targets) if norm else test.targets
    raw_p = norm.denormalize_targets(pred) if norm else pred
    rows = (
        (ds.split_index + i, _fmt(d), _fmt(p), _fmt(rd), _fmt(rp))
        for i, (d, p, rd, rp) in enumerate(zip(test.targets, pred, raw_t, raw_p))
    )
    _write_csv(path, ("pattern", "desired", "predicted", "desired_raw", "predicted_raw"), rows)


def _worst(rows: list[dict]) -> dict:
    # worst test RMSE; ties go to the earliest repetition
    return max(rows, key=lambda r: (r["test_rmse"], -r["repetition"]))


def _start_artifact(cfg: ExperimentConfig, ds: SupervisedDataset, command: str) -> Path:
    out = Path(cfg.out)
    (out / "reports").mkdir(parents=True, exist_ok=True)
    # one entry per command, so evolve and baseline can share a directory
    cfg_path = out / "config.json"
    snapshot = json.loads(cfg_path.read_text(encoding="utf-8")) if cfg_path.exists() else {}
    snapshot[command] = {
        "seed": cfg.seed,
        "experiment": cfg.to_dict(),
        "dataset": {
            "name": ds.name,
            "n_patterns": ds.n_patterns,
            "n_inputs": ds.n_inputs,
            "split_index": ds.split_index,
            "normalization": ds.normalization.to_dict() if ds.normalization else None,
            "metadata": ds.metadata,
        },
    }
    _write_json(cfg_path, snapshot)
    return out


def _merge_summary(out: Path, rows: list[dict]) -> list[dict]:
    """Replace rows of the same (method, trainer) in an existing summary."""
    existing = []
    path = out / "summary.csv"
    if path.exists():
        existing = read_summary_csv(path)
    keys = {(r["method"], r["trainer"]) for r in rows}
    merged = [r for r in existing if (r["method"], r["trainer"]) not in keys] + rows
    merged.sort(key=lambda r: (r["dataset"], r["method"] != HYBRID, r["method"], _trainer_order(r["trainer"])))
    write_summary(out, merged)
    return merged


def _trainer_order(name: str) -> int:
    try:
        return TrainerKind.parse(name).value
    except ValueError:
        return len(TrainerKind)


def write_summary(out: Path, rows: list[dict]) -> None:
    _write_csv(out / "summary.csv", SUMMARY_COLUMNS, (
        (r["dataset"], r["method"], r["trainer"], _fmt(r["train_rmse"]), _fmt(r["test_rmse"]),
         r["architecture"], r["repetition"], r["seed"]) for r in rows
    ))
    table = [("dataset", "method", "trainer", "train RMSE", "test RMSE", "architecture")]
    table += [(r["dataset"], r["method"], r["trainer"], format_rmse(r["train_rmse"]),
               format_rmse(r["test_rmse"]), r["architecture"]) for r in rows]
    (out / "summary.txt").write_text(render_rows(table) + "\n", encoding="utf-8")


def read_summary_csv(path) -> list[dict]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != SUMMARY_COLUMNS:
            raise ValueError(f"{path}: not a summary file (columns {reader.fieldnames})")
        rows = []
        for r in reader:
            r["train_rmse"] = float(r["train_rmse"])
            r["test_rmse"] = float(r["test_rmse"])
            r["repetition"] = int(r["repetition"])
            r["seed"] = int(r["seed"])
            rows.append(r)
    return rows


def format_rmse(v: float) -> str:
    if not math.isfinite(v):
        return str(v)
    return f"{v:.4f}" if v >= 1e-3 else f"{v:.2e}"


def render_rows(rows: Sequence[Sequence[str]]) -> str:
    widths = [max(len(str(r[i])) for r in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(str(c).ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


# --- commands -------------------------------------------------------------------

Progress = Callable[[str], None]


def _quiet(_msg: str) -> None:
    pass


def run_evolve(cfg: ExperimentConfig, progress: Progress = _quiet) -> list[dict]:
    """Run every requested trainer for ``cfg.repetitions`` repetitions; returns summary rows."""
    ds = load_dataset(cfg)
    # validate every evolution config before doing any work
    for trainer in cfg.trainers:
        cfg.evolution_config(trainer, 0)
    out = _start_artifact(cfg, ds, "evolve")
    rows = []
    for trainer in cfg.trainers:
        label = trainer.upper() if trainer != EVOLVED else EVOLVED
        reps, genomes, reports = [], [], []
        for r in range(cfg.repetitions):
            ecfg = cfg.evolution_config(trainer, r)
            t0 = time.perf_counter()
            report = evolve_dataset(ds, ecfg, progress=lambda s, r=r: progress(
                f"{label} rep {r} gen {s.generation}: best {s.best_rmse:.6f} mean {s.mean_rmse:.6f} "
                f"[{s.best_architecture}]"))
            elapsed = time.perf_counter() - t0
            reports.append(report)
            _write_json(out / "reports" / f"{HYBRID}_{label}_rep{r}.json",
                        {"report": report.to_dict(), "runtime_seconds": elapsed})
            _write_csv(out / f"trace_{label}_rep{r}.csv", ("generation", "average_test_rmse"),
                       ((g.generation, _fmt(g.mean_test_rmse)) for g in report.generations))
            best = report.best
            genomes.append({"repetition": r, "seed": ecfg.seed, "test_rmse": best.test_rmse,
                            "trainer": best.trainer.kind.name, "architecture": best.trained_phenotype.architecture,
                            "genome": best.genome.to_dict()})
            reps.append({
                "dataset": ds.name, "method": HYBRID, "trainer": label,
                "train_rmse": best.train_rmse, "test_rmse": best.test_rmse,
                "architecture": best.trained_phenotype.architecture, "repetition": r, "seed": ecfg.seed,
            })
            progress(f"{label} rep {r}: train {best.train_rmse:.6f} test {best.test_rmse:.6f} "
                     f"[{best.trained_phenotype.architecture}] {elapsed:.1f}s")
        worst = _worst(reps)
        _write_json(out / f"best_genome_{label}.json",
                    {"reported_repetition": worst["repetition"], "repetitions": genomes})
        _write_predictions(out / f"predictions_{HYBRID}_{label}.csv", ds,
                           reports[worst["repetition"]].predictions)
        rows.append(worst)
    _merge_summary(out, rows)
    return rows


def run_baseline(cfg: ExperimentConfig, progress: Progress = _quiet) -> list[dict]:
    """Train a fixed architecture from random +/-0.3 weights with each trainer."""
    ds = load_dataset(cfg)
    shape = NetworkShape(ds.n_inputs, parse_architecture(cfg.baseline_architecture))
    kinds = [TrainerKind.parse(t) for t in cfg.trainers if t != EVOLVED]
    if not kinds:
        raise ValueError("baseline needs at least one concrete trainer (bp, scg, qna, lm)")
    out = _start_artifact(cfg, ds, "baseline")
    rows = []
    for kind in kinds:
        spec = TrainerSpec.default(kind)
        reps, preds = [], []
        for r in range(cfg.repetitions):
            seed = repetition_seed(cfg.seed, r)
            net = random_network(shape, np.random.default_rng(seed), scale=0.3)
            t0 = time.perf_counter()
            result = train(net, ds.train, spec, cfg.baseline_epochs)
            elapsed = time.perf_counter() - t0
            trained = result.network(shape)
            row = {
                "dataset": ds.name, "method": BASELINE, "trainer": kind.name,
                "train_rmse": rmse(trained, ds.train), "test_rmse": rmse(trained, ds.test),
                "architecture": format_architecture(shape.activations), "repetition": r, "seed": seed,
            }
            reps.append(row)
            preds.append(predict(trained, ds.test.inputs))
            _write_json(out / "reports" / f"{BASELINE}_{kind.name}_rep{r}.json", {
                "row": row, "trainer": {"kind": kind.name, **spec.as_dict()},
                "epochs": cfg.baseline_epochs, "epochs_used": result.epochs_used,
                "termination": result.termination.value, "epoch_rmse": result.epoch_rmse,
                "params": result.final_params.tolist(), "runtime_seconds": elapsed,
            })
            progress(f"baseline {kind.name} rep {r}: train {row['train_rmse']:.6f} "
                     f"test {row['test_rmse']:.6f} {elapsed:.1f}s")
        worst = _worst(reps)
        _write_predictions(out / f"predictions_{BASELINE}_{kind.name}.csv", ds, preds[worst["repetition"]])
        rows.append(worst)
    _merge_summary(out, rows)
    return rows


def run_train(cfg: ExperimentConfig, architecture: str, trainer: str, epochs: int,
              params: dict[str, float] | None = None, trace_path=None) -> dict:
    """Train a single network once and write its epoch-RMSE trace."""
    ds = load_dataset(cfg)
    shape = NetworkShape(ds.n_inputs, parse_architecture(architecture))
    kind = TrainerKind.parse(trainer)
    spec = TrainerSpec.from_dict(kind, params or {}) if params else TrainerSpec.default(kind)
    net = random_network(shape, np.random.default_rng(cfg.seed), scale=0.3)
    result = train(net, ds.train, spec, epochs)
    trained = result.network(shape)
    out = Path(trace_path) if trace_path else Path(cfg.out) / "train_trace.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_csv(out, ("epoch", "train_rmse"), ((i + 1, _fmt(v)) for i, v in enumerate(result.epoch_rmse)))
    return {
        "architecture": format_architecture(shape.activations),
        "trainer": {"kind": kind.name, **spec.as_dict()},
        "epochs_used": result.epochs_used,
        "termination": result.termination.value,
        "train_rmse": rmse(trained, ds.train),
        "test_rmse": rmse(trained, ds.test),
        "trace": str(out),
        "seed": cfg.seed,
    }


# --- report ---------------------------------------------------------------------

REPORT_COLUMNS = ("dataset", "trainer", "hybrid_train_rmse", "hybrid_test_rmse", "hybrid_architecture",
                  "baseline_train_rmse", "baseline_test_rmse", "baseline_architecture")


@dataclass
class ReportTable:
    rows: list[dict] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)

    def best_marks(self) -> set[tuple[int, str]]:
        """(row index, column) pairs holding the lowest test RMSE of their dataset."""
        marks = set()
        for col in ("hybrid_test_rmse", "baseline_test_rmse"):
            by_ds: dict[str, list[int]] = {}
            for i, r in enumerate(self.rows):
                if r[col] is not None:
                    by_ds.setdefault(r["dataset"], []).append(i)
            for idx in by_ds.values():
                low = min(self.rows[i][col] for i in idx)
                marks.update((i, col) for i in idx if self.rows[i][col] == low)
        return marks

    def render(self) -> str:
        marks = self.best_marks()

        def cell(i, col):
            v = self.rows[i][col]
            if v is None:
                return "-"
            return ("†" if (i, col) in marks else "") + format_rmse(v)

        head = ("dataset", "trainer", "hybrid train", "hybrid test", "architecture",
                "baseline train", "baseline test", "architecture")
        body = [(r["dataset"], r["trainer"],
                 cell(i, "hybrid_train_rmse"), cell(i, "hybrid_test_rmse"), r["hybrid_architecture"] or "-",
                 cell(i, "baseline_train_rmse"), cell(i, "baseline_test_rmse"), r["baseline_architecture"] or "-")
                for i, r in enumerate(self.rows)]
        return render_rows([head] + body)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in self.rows:
            w.writerow(["" if r[c] is None else (_fmt(r[c]) if c.endswith("rmse") else r[c])
                        for c in REPORT_COLUMNS])
        return buf.getvalue()


def _rows_from_summary(summary: list[dict]) -> dict[tuple[str, str], dict]:
    out: dict[tuple[str, str], dict] = {}
    for s in summary:
        key = (s["dataset"], s["trainer"])
        row = out.setdefault(key, {c: None for c in REPORT_COLUMNS} | {"dataset": key[0], "trainer": key[1]})
        prefix = "hybrid" if s["method"] == HYBRID else "baseline"
        row[f"{prefix}_train_rmse"] = s["train_rmse"]
        row[f"{prefix}_test_rmse"] = s["test_rmse"]
        row[f"{prefix}_architecture"] = s["architecture"]
    return out


def _read_report_csv(path: Path) -> list[dict]:
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != REPORT_COLUMNS:
            raise ValueError(f"{path}: not a report file (columns {reader.fieldnames})")
        rows = []
        for r in reader:
            rows.append({c: (float(r[c]) if c.endswith("rmse") else r[c]) if r[c] != "" else None
                         for c in REPORT_COLUMNS})
    return rows


def build_report(sources: Sequence) -> ReportTable:
    """Merge artifact directories and/or merged report CSVs; bad sources are listed, not fatal."""
    table = ReportTable()
    merged: dict[tuple[str, str], dict] = {}

    def absorb(row):
        key = (row["dataset"], row["trainer"])
        cur = merged.setdefault(key, {c: None for c in REPORT_COLUMNS} | {"dataset": key[0], "trainer": key[1]})
        for c in REPORT_COLUMNS[2:]:
            if row[c] is not None:
                cur[c] = row[c]

    for src in sources:
        p = Path(src)
        try:
            if p.is_dir():
                summary_path = p / "summary.csv"
                if not summary_path.exists():
                    raise FileNotFoundError(f"{p}: no summary.csv (not an artifact directory)")
                rows = _rows_from_summary(read_summary_csv(summary_path)).values()
            elif p.is_file():
                try:
                    rows = _read_report_csv(p)
                except ValueError:
                    rows = _rows_from_summary(read_summary_csv(p)).values()
            else:
                raise FileNotFoundError(f"{p}: no such file or directory")
            for row in rows:
                absorb(row)
        except (OSError, ValueError, KeyError, csv.Error) as exc:
            table.errors.append(f"{p}: {exc}" if str(p) not in str(exc) else str(exc))
    table.rows = sorted(merged.values(), key=lambda r: (r["dataset"], _trainer_order(r["trainer"]), r["trainer"]))
    return table


__all__ = [
    "ExperimentConfig", "ReportTable", "build_report", "load_dataset", "read_config_file", "resolve_config",
    "run_baseline", "run_evolve", "run_train", "repetition_seed", "read_summary_csv", "write_config_file",
]
