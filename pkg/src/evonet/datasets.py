"""Benchmark series, their input embeddings, normalisation and splits.

Three problems are supported:

* ``mackey`` - the Mackey-Glass delay equation integrated with RK4 and
  embedded as ``[x(t-18), x(t-12), x(t-6), x(t)] -> x(t+6)``, 1000 patterns,
  the first 500 for training.
* ``gas`` - the Box-Jenkins gas furnace, ``[u(t), y(t)] -> y(t+1)``,
  292 patterns split in half. The series is read from a user-supplied
  two-column CSV.
* ``wastewater`` - hourly sewage-plant inflow,
  ``[f(t), f(t-1), a(t), b(t)] -> f(t+1)`` with 12 h and 24 h trailing means,
  475 patterns, the first 240 for training. The original data is not
  redistributable and must be supplied by the user.

``gas-surrogate`` and ``wastewater-surrogate`` are synthetic stand-ins with
the same schema. They exercise the pipeline and are not the benchmark data.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .network import EvaluationBatch


class DatasetError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class RawSeries:
    values: np.ndarray
    sample_interval: float = 1.0

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if not np.all(np.isfinite(v)):
            raise DatasetError("series contains NaN or infinite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.shape[0]


@dataclass(frozen=True)
class Normalization:
    """Per-column ``(min, max)`` of the training portion, mapped onto ``[0, 1]``."""

    input_min: tuple[float, ...]
    input_max: tuple[float, ...]
    target_min: float
    target_max: float

    def inputs(self, X: np.ndarray) -> np.ndarray:
        lo = np.asarray(self.input_min)
        return (X - lo) / (np.asarray(self.input_max) - lo)

    def targets(self, t: np.ndarray) -> np.ndarray:
        return (t - self.target_min) / (self.target_max - self.target_min)

    def denormalize_inputs(self, X: np.ndarray) -> np.ndarray:
        lo = np.asarray(self.input_min)
        return X * (np.asarray(self.input_max) - lo) + lo

    def denormalize_targets(self, t: np.ndarray) -> np.ndarray:
        return t * (self.target_max - self.target_min) + self.target_min

    def to_dict(self) -> dict:
        return {
            "input_min": list(self.input_min),
            "input_max": list(self.input_max),
            "target_min": self.target_min,
            "target_max": self.target_max,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Normalization":
        return cls(tuple(d["input_min"]), tuple(d["input_max"]), d["target_min"], d["target_max"])


@dataclass(frozen=True, eq=False)
class SupervisedDataset:
    name: str
    inputs: np.ndarray
    targets: np.ndarray
    split_index: int
    columns: tuple[str, ...] = ()
    normalization: Normalization | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.array(self.inputs, dtype=np.float64)
        t = np.array(self.targets, dtype=np.float64)
        if X.ndim != 2 or t.ndim != 1 or X.shape[0] != t.shape[0]:
            raise DatasetError("inputs must be P x d and targets length P")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(t))):
            raise DatasetError(f"dataset {self.name!r} contains NaN or infinite values")
        P = X.shape[0]
        if not 1 <= self.split_index <= P - 1:
            raise DatasetError(f"split index {self.split_index} outside [1, {P - 1}]")
        X.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "inputs", X)
        object.__setattr__(self, "targets", t)
        cols = tuple(self.columns) or tuple(f"x{i}" for i in range(X.shape[1])) + ("target",)
        if len(cols) != X.shape[1] + 1:
            raise DatasetError(f"expected {X.shape[1] + 1} column names, got {len(cols)}")
        object.__setattr__(self, "columns", cols)

    @property
    def n_patterns(self) -> int:
        return self.inputs.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.inputs.shape[1]

    @property
    def train(self) -> EvaluationBatch:
        return EvaluationBatch(self.inputs[:self.split_index], self.targets[:self.split_index])

    @property
    def test(self) -> EvaluationBatch:
        return EvaluationBatch(self.inputs[self.split_index:], self.targets[self.split_index:])

    def holdout(self, fraction: float = 0.2) -> tuple[EvaluationBatch, EvaluationBatch]:
        """Split the training portion into (fit, holdout), holdout being its last ``fraction``."""
        n_hold = max(1, int(round(self.split_index * fraction)))
        cut = self.split_index - n_hold
        if cut < 1:
            raise DatasetError("training portion too small for a holdout split")
        return (
            EvaluationBatch(self.inputs[:cut], self.targets[:cut]),
            EvaluationBatch(self.inputs[cut:self.split_index], self.targets[cut:self.split_index]),
        )


def mackey_glass_generate(
    n_samples: int = 1024,
    dt: float = 0.1,
    tau: float = 17.0,
    x0: float = 1.2,
    history: float = 0.0,
    beta: float = 0.2,
    gamma: float = 0.1,
    exponent: float = 10.0,
) -> RawSeries:
    """Integrate ``dx/dt = beta x(t-tau) / (1 + x(t-tau)^n) - gamma x(t)`` by RK4.

    ``x(t) = history`` for ``t < 0`` and ``x(0) = x0``. The delayed value for
    the two half-step stages is the mean of the neighbouring grid values; the
    full-step stages read the grid exactly, taking the left limit (the
    pre-history) for the step that ends at ``t = tau``. The returned series
    is sampled at unit time, ``values[k] = x(k)``.
    """
    lag = tau / dt
    per_unit = 1.0 / dt
    if abs(lag - round(lag)) > 1e-9 * max(1.0, lag) or round(lag) < 1:
        raise DatasetError(f"tau/dt = {tau}/{dt} = {lag:.6g} must be a positive integer")
    if abs(per_unit - round(per_unit)) > 1e-9 * per_unit:
        raise DatasetError(f"1/dt = {per_unit:.6g} must be an integer for unit-time sampling")
    if n_samples < 1:
        raise DatasetError("n_samples must be at least 1")
    m = int(round(lag))
    k = int(round(per_unit))
    n_steps = (n_samples - 1) * k
    x = np.empty(n_steps + 1)
    x[0] = x0

    def rhs(xv, xd):
        return beta * xd / (1.0 + xd ** exponent) - gamma * xv

    half = 0.5 * dt
    for i in range(n_steps):
        d0 = x[i - m] if i >= m else history
        # left limit: over this step the delayed time is still in the pre-history
        d1 = x[i + 1 - m] if i + 1 > m else history
        dh = 0.5 * (d0 + d1)
        xi = x[i]
        k1 = rhs(xi, d0)
        k2 = rhs(xi + half * k1, dh)
        k3 = rhs(xi + half * k2, dh)
        k4 = rhs(xi + dt * k3, d1)
        x[i + 1] = xi + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return RawSeries(x[::k].copy(), 1.0)


MACKEY_LAGS = (18, 12, 6, 0)
MACKEY_HORIZON = 6


def embed_mackey(series: RawSeries, n_patterns: int = 1000, split_index: int = 500) -> SupervisedDataset:
    x = series.values
    first = max(MACKEY_LAGS)
    need = first + n_patterns + MACKEY_HORIZON
    if x.shape[0] < need:
        raise DatasetError(f"need at least {need} samples for {n_patterns} patterns, got {x.shape[0]}")
    t = np.arange(first, first + n_patterns)
    X = np.column_stack([x[t - lag] for lag in MACKEY_LAGS])
    return SupervisedDataset(
        "mackey",
        X,
        x[t + MACKEY_HORIZON],
        split_index,
        columns=("x(t-18)", "x(t-12)", "x(t-6)", "x(t)", "x(t+6)"),
        metadata={"embedding": "[x(t-18), x(t-12), x(t-6), x(t)] -> x(t+6)", "first_t": first},
    )


def moving_average(series, window: int) -> np.ndarray:
    """Trailing mean over ``window`` samples; the first entries use the shorter prefix."""
    x = np.asarray(series, dtype=np.float64)
    if window < 1:
        raise DatasetError("window must be at least 1")
    if x.size == 0:
        raise DatasetError("cannot average an empty series")
    # direct per-window means: exact for window 1 and constant input, unlike a running sum
    return np.array([x[max(0, t - window + 1):t + 1].mean() for t in range(x.size)])


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def read_numeric_csv(path, n_columns: int) -> np.ndarray:
    """Read a headerless or single-header numeric CSV with ``n_columns`` columns."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"data file not found: {path}")
    rows: list[list[float]] = []
    problems: list[str] = []
    with path.open(newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            cells = [c.strip() for c in row]
            if not any(cells):
                continue
            try:
                values = [float(c) for c in cells]
            except ValueError:
                if lineno == 1 and not rows:
                    continue  # header
                problems.append(f"row {lineno}: non-numeric value in {row!r}")
                continue
            if len(values) != n_columns:
                problems.append(f"row {lineno}: expected {n_columns} columns, found {len(values)}")
                continue
            if not all(math.isfinite(v) for v in values):
                problems.append(f"row {lineno}: NaN or infinite value")
                continue
            rows.append(values)
    if problems:
        shown = "; ".join(problems[:5])
        more = f" (+{len(problems) - 5} more)" if len(problems) > 5 else ""
        raise DatasetError(f"{path}: {shown}{more}")
    return np.array(rows, dtype=np.float64).reshape(-1, n_columns)


GAS_PATTERNS = 292
GAS_SPLIT = 146


def gas_furnace_dataset(u, y, name: str = "gas", metadata: dict | None = None) -> SupervisedDataset:
    u = np.asarray(u, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if u.shape[0] < GAS_PATTERNS + 1:
        raise DatasetError(f"gas furnace needs at least {GAS_PATTERNS + 1} observations, got {u.shape[0]}")
    X = np.column_stack([u[:GAS_PATTERNS], y[:GAS_PATTERNS]])
    return SupervisedDataset(
        name,
        X,
        y[1:GAS_PATTERNS + 1],
        GAS_SPLIT,
        columns=("u(t)", "y(t)", "y(t+1)"),
        metadata={"embedding": "[u(t), y(t)] -> y(t+1)", **(metadata or {})},
    )


def load_gas_furnace(path) -> SupervisedDataset:
    """Two-column CSV: gas feed rate ``u`` then CO2 concentration ``y``."""
    path = Path(path)
    data = read_numeric_csv(path, 2)
    return gas_furnace_dataset(
        data[:, 0], data[:, 1], metadata={"source": str(path), "sha256": _sha256(path)}
    )


WASTEWATER_PATTERNS = 475
WASTEWATER_SPLIT = 240


def wastewater_dataset(flow, name: str = "wastewater", metadata: dict | None = None) -> SupervisedDataset:
    f = np.asarray(flow, dtype=np.float64).ravel()
    need = WASTEWATER_PATTERNS + 2
    if f.shape[0] < need:
        raise DatasetError(f"wastewater needs at least {need} hourly values, got {f.shape[0]}")
    a = moving_average(f, 12)
    b = moving_average(f, 24)
    t = np.arange(1, WASTEWATER_PATTERNS + 1)
    X = np.column_stack([f[t], f[t - 1], a[t], b[t]])
    return SupervisedDataset(
        name,
        X,
        f[t + 1],
        WASTEWATER_SPLIT,
        columns=("f(t)", "f(t-1)", "a12(t)", "b24(t)", "f(t+1)"),
        metadata={"embedding": "[f(t), f(t-1), a12(t), b24(t)] -> f(t+1)", **(metadata or {})},
    )


def load_wastewater(path) -> SupervisedDataset:
    """Single-column hourly flow CSV (the original series is user-supplied)."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(
            f"wastewater data not found at {path}. The original hourly sewage-plant inflow "
            "series (Kasabov, Foundations of Neural Networks, Fuzzy Systems and Knowledge "
            "Engineering, 1996) is not distributed with this package; supply it as a "
            "single-column CSV, or use the 'wastewater-surrogate' dataset for pipeline tests."
        )
    data = read_numeric_csv(path, 1)
    return wastewater_dataset(data[:, 0], metadata={"source": str(path), "sha256": _sha256(path)})


def wastewater_surrogate(n: int = 477, seed: int = 0) -> np.ndarray:
    """Synthetic hourly inflow: daily and weekly cycles plus AR(1) noise. Not real data."""
    rng = np.random.default_rng(seed)
    h = np.arange(n)
    noise = np.zeros(n)
    eps = rng.normal(0.0, 0.04, n)
    for i in range(1, n):
        noise[i] = 0.7 * noise[i - 1] + eps[i]
    return (
        1.0
        + 0.35 * np.sin(2 * np.pi * (h - 7) / 24)
        + 0.12 * np.sin(4 * np.pi * (h - 3) / 24)
        + 0.08 * np.sin(2 * np.pi * h / 168)
        + noise
    )


def gas_furnace_surrogate(n: int = 296, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Synthetic ``(u, y)`` from a delayed second-order ARX process. Not the Box-Jenkins data."""
    rng = np.random.default_rng(seed)
    u = np.zeros(n)
    e = rng.normal(0.0, 0.35, n)
    for i in range(2, n):
        u[i] = 1.6 * u[i - 1] - 0.7 * u[i - 2] + e[i]
    u = np.clip(u, -2.7, 2.8)
    y = np.full(n, 53.5)
    v = rng.normal(0.0, 0.1, n)
    for i in range(5, n):
        y[i] = (
            53.5
            + 1.45 * (y[i - 1] - 53.5)
            - 0.55 * (y[i - 2] - 53.5)
            - 0.55 * u[i - 3]
            - 0.35 * u[i - 4]
            - 0.45 * u[i - 5]
            + v[i]
        )
    return u, y


def normalize(ds: SupervisedDataset) -> SupervisedDataset:
    """Map every column onto ``[0, 1]`` using training-portion minima and maxima."""
    n = ds.split_index
    X_train = ds.inputs[:n]
    lo = X_train.min(axis=0)
    hi = X_train.max(axis=0)
    for j in range(ds.n_inputs):
        if not hi[j] > lo[j]:
            raise DatasetError(f"input column {j} ({ds.columns[j]}) is constant on the training portion")
    t_lo = float(ds.targets[:n].min())
    t_hi = float(ds.targets[:n].max())
    if not t_hi > t_lo:
        raise DatasetError(f"target column ({ds.columns[-1]}) is constant on the training portion")
    norm = Normalization(tuple(map(float, lo)), tuple(map(float, hi)), t_lo, t_hi)
    return replace(ds, inputs=norm.inputs(ds.inputs), targets=norm.targets(ds.targets), normalization=norm)


def denormalize(ds: SupervisedDataset) -> SupervisedDataset:
    if ds.normalization is None:
        return ds
    norm = ds.normalization
    return replace(
        ds,
        inputs=norm.denormalize_inputs(ds.inputs),
        targets=norm.denormalize_targets(ds.targets),
        normalization=None,
    )


def write_dataset(ds: SupervisedDataset, path) -> tuple[Path, Path]:
    """Write ``path`` (CSV with one header row) and a JSON sidecar next to it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ds.columns)
        for x, t in zip(ds.inputs, ds.targets):
            w.writerow([repr(float(v)) for v in x] + [repr(float(t))])
    sidecar = path.with_suffix(".json")
    meta = {
        "name": ds.name,
        "n_patterns": ds.n_patterns,
        "n_inputs": ds.n_inputs,
        "split_index": ds.split_index,
        "columns": list(ds.columns),
        "normalization": ds.normalization.to_dict() if ds.normalization else None,
        "metadata": ds.metadata,
    }
    sidecar.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path, sidecar


def read_dataset(path) -> SupervisedDataset:
    """Inverse of :func:`write_dataset`."""
    path = Path(path)
    sidecar = path.with_suffix(".json")
    if not sidecar.exists():
        raise DatasetError(f"missing sidecar {sidecar}")
    meta = json.loads(sidecar.read_text(encoding="utf-8"))
    data = read_numeric_csv(path, meta["n_inputs"] + 1)
    norm = meta.get("normalization")
    return SupervisedDataset(
        meta["name"],
        data[:, :-1],
        data[:, -1],
        meta["split_index"],
        columns=tuple(meta["columns"]),
        normalization=Normalization.from_dict(norm) if norm else None,
        metadata=meta.get("metadata", {}),
    )


DATASETS = ("mackey", "gas", "gas-surrogate", "wastewater", "wastewater-surrogate")
GAS_ENV = "EVONET_GAS_FURNACE"
WASTEWATER_ENV = "EVONET_WASTEWATER"


def gas_furnace_path() -> Path | None:
    """User-supplied gas furnace CSV from ``$EVONET_GAS_FURNACE``, if it exists."""
    p = os.environ.get(GAS_ENV)
    return Path(p) if p and Path(p).exists() else None


def build_dataset(name: str, path=None, *, dt: float = 0.1, tau: float = 17.0, x0: float = 1.2,
                  seed: int = 0) -> SupervisedDataset:
    """Raw (unnormalised) dataset by name; ``path`` is needed for ``gas``/``wastewater``."""
    if name == "mackey":
        return embed_mackey(mackey_glass_generate(1024, dt=dt, tau=tau, x0=x0))
    if name == "gas":
        path = path or os.environ.get(GAS_ENV)
        if not path:
            raise DatasetError(
                "the gas furnace series (Box & Jenkins 1970, series J) is not bundled; pass "
                f"--data PATH or set ${GAS_ENV} to a two-column u,y CSV"
            )
        return load_gas_furnace(path)
    if name == "gas-surrogate":
        u, y = gas_furnace_surrogate(seed=seed)
        return gas_furnace_dataset(u, y, name="gas-surrogate", metadata={"synthetic": True, "seed": seed})
    if name == "wastewater":
        path = path or os.environ.get(WASTEWATER_ENV)
        if not path:
            raise DatasetError(f"wastewater data is user-supplied; pass --data PATH or set ${WASTEWATER_ENV}")
        return load_wastewater(path)
    if name == "wastewater-surrogate":
        return wastewater_dataset(
            wastewater_surrogate(seed=seed), name="wastewater-surrogate",
            metadata={"synthetic": True, "seed": seed},
        )
    raise DatasetError(f"unknown dataset {name!r}; expected one of {', '.join(DATASETS)}")
