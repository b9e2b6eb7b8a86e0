import json

import numpy as np
import pytest

from evonet.datasets import (
    DatasetError,
    RawSeries,
    build_dataset,
    denormalize,
    embed_mackey,
    gas_furnace_surrogate,
    load_gas_furnace,
    load_wastewater,
    mackey_glass_generate,
    moving_average,
    normalize,
    read_dataset,
    read_numeric_csv,
    wastewater_dataset,
    wastewater_surrogate,
    write_dataset,
)
from oracles import mackey_glass_rk4_reference


# --- Mackey-Glass ----------------------------------------------------------------

def test_constant_history_fixed_point():
    s = mackey_glass_generate(200, x0=1.0, history=1.0)
    assert np.all(s.values == 1.0)


def test_zero_fixed_point():
    s = mackey_glass_generate(200, x0=0.0, history=0.0)
    assert np.all(s.values == 0.0)


def test_step_halving_agreement():
    a = mackey_glass_generate(101, dt=0.1).values
    b = mackey_glass_generate(101, dt=0.05).values
    assert np.max(np.abs(a - b)) < 1e-3


def test_matches_reference_loop():
    ref = mackey_glass_rk4_reference(300 * 10, 0.1, 17.0, 1.2)[::10]
    np.testing.assert_allclose(mackey_glass_generate(301).values, ref, rtol=0, atol=1e-12)


def test_generator_deterministic_and_chaotic_range():
    a = mackey_glass_generate().values
    b = mackey_glass_generate().values
    assert np.array_equal(a, b)
    assert a[0] == 1.2 and len(a) == 1024
    assert 0.2 < a[200:].min() < a[200:].max() < 1.5


@pytest.mark.parametrize("dt, tau", [(0.3, 17.0), (0.1, 17.05), (0.07, 0.7)])
def test_rejects_incommensurate_steps(dt, tau):
    with pytest.raises(DatasetError, match="integer"):
        mackey_glass_generate(10, dt=dt, tau=tau)


def test_embedding_shape_and_indices():
    series = mackey_glass_generate()
    ds = embed_mackey(series)
    x = series.values
    assert ds.inputs.shape == (1000, 4) and ds.split_index == 500
    assert ds.inputs[0].tolist() == [x[0], x[6], x[12], x[18]]
    assert ds.targets[0] == x[24]
    assert ds.inputs[999].tolist() == [x[999], x[1005], x[1011], x[1017]]
    assert ds.targets[999] == x[1023]


def test_embedding_constant_series():
    ds = embed_mackey(RawSeries(np.full(1024, 0.7)))
    assert np.all(ds.inputs == 0.7) and np.all(ds.targets == 0.7)


def test_embedding_too_short():
    with pytest.raises(DatasetError):
        embed_mackey(RawSeries(np.ones(1023)))


def test_raw_series_rejects_nan():
    with pytest.raises(DatasetError):
        RawSeries(np.array([1.0, np.nan]))


# --- moving averages / wastewater ------------------------------------------------

def test_moving_average_examples():
    assert moving_average([1, 2, 3, 4], 2).tolist() == [1, 1.5, 2.5, 3.5]
    x = np.random.default_rng(0).random(30)
    np.testing.assert_array_equal(moving_average(x, 1), x)
    assert np.all(moving_average(np.full(10, 3.0), 4) == 3.0)
    with pytest.raises(DatasetError):
        moving_average([], 3)
    with pytest.raises(DatasetError):
        moving_average([1.0], 0)


def test_wastewater_layout_and_naive_means():
    f = wastewater_surrogate()
    ds = wastewater_dataset(f)
    assert ds.inputs.shape == (475, 4) and ds.split_index == 240
    for p in (0, 10, 11, 23, 100, 474):
        t = p + 1
        a = sum(f[max(0, t - 11):t + 1]) / len(f[max(0, t - 11):t + 1])
        b = sum(f[max(0, t - 23):t + 1]) / len(f[max(0, t - 23):t + 1])
        assert ds.inputs[p].tolist()[:2] == [f[t], f[t - 1]]
        assert ds.inputs[p, 2] == pytest.approx(a, rel=1e-13)
        assert ds.inputs[p, 3] == pytest.approx(b, rel=1e-13)
        assert ds.targets[p] == f[t + 1]


def test_wastewater_constant_flow():
    ds = wastewater_dataset(np.full(500, 2.5))
    assert np.allclose(ds.inputs, 2.5) and np.allclose(ds.targets, 2.5)


def test_wastewater_short_and_missing(tmp_path):
    with pytest.raises(DatasetError):
        wastewater_dataset(np.ones(476))
    with pytest.raises(FileNotFoundError, match="not distributed"):
        load_wastewater(tmp_path / "nope.csv")


def test_wastewater_loader(tmp_path):
    f = wastewater_surrogate(n=600, seed=3)
    path = tmp_path / "flow.csv"
    path.write_text("flow\n" + "\n".join(repr(float(v)) for v in f) + "\n")
    ds = load_wastewater(path)
    assert ds.n_patterns == 475 and ds.metadata["sha256"]


# --- gas furnace -----------------------------------------------------------------

def _write_uy(path, u, y, header=True):
    lines = (["u,y"] if header else []) + [f"{float(a)!r},{float(b)!r}" for a, b in zip(u, y)]
    path.write_text("\n".join(lines) + "\n")


def test_gas_layout(tmp_path):
    u, y = gas_furnace_surrogate()
    path = tmp_path / "gas.csv"
    _write_uy(path, u, y, header=False)
    ds = load_gas_furnace(path)
    assert ds.inputs.shape == (292, 2) and ds.split_index == 146
    assert ds.inputs[0].tolist() == [u[0], y[0]] and ds.targets[0] == y[1]
    assert ds.targets[-1] == y[292]


def test_gas_constant_target(tmp_path):
    path = tmp_path / "gas.csv"
    _write_uy(path, np.linspace(-1, 1, 296), np.full(296, 53.0))
    assert np.all(load_gas_furnace(path).targets == 53.0)


def test_gas_rejects_bad_files(tmp_path):
    path = tmp_path / "bad.csv"
    _write_uy(path, np.ones(300), np.ones(300))
    text = path.read_text().splitlines()
    text[10] = "0.1,abc"
    text[20] = "0.1"
    path.write_text("\n".join(text))
    with pytest.raises(DatasetError, match="row 11.*row 21"):
        load_gas_furnace(path)
    short = tmp_path / "short.csv"
    _write_uy(short, np.ones(292), np.arange(292.0))
    with pytest.raises(DatasetError, match="293"):
        load_gas_furnace(short)
    nan = tmp_path / "nan.csv"
    _write_uy(nan, np.ones(300), np.r_[np.arange(299.0), np.nan])
    with pytest.raises(DatasetError, match="NaN"):
        load_gas_furnace(nan)


def test_gas_requires_user_data(monkeypatch):
    monkeypatch.delenv("EVONET_GAS_FURNACE", raising=False)
    with pytest.raises(DatasetError, match="not bundled"):
        build_dataset("gas")


# --- normalisation and files -----------------------------------------------------

def test_normalize_maps_train_to_unit_interval():
    ds = normalize(build_dataset("mackey"))
    train = ds.inputs[:500]
    assert train.min() == 0.0 and train.max() == 1.0
    assert np.all(train.min(axis=0) == 0.0) and np.all(train.max(axis=0) == 1.0)
    assert ds.targets[:500].min() == 0.0 and ds.targets[:500].max() == 1.0


def test_normalize_uses_training_portion_only():
    X = np.array([[0.0], [5.0], [10.0], [100.0]])
    ds = normalize(gas_like(X, np.array([1.0, 2.0, 3.0, 50.0]), split=3))
    assert ds.inputs[:, 0].tolist() == [0.0, 0.5, 1.0, 10.0]
    assert ds.targets.tolist() == [0.0, 0.5, 1.0, 24.5]


def gas_like(X, t, split):
    from evonet.datasets import SupervisedDataset
    return SupervisedDataset("toy", X, t, split)


def test_normalize_identity_on_unit_columns():
    X = np.array([[0.0, 0.2], [1.0, 0.0], [0.5, 1.0], [0.3, 0.4]])
    ds = normalize(gas_like(X, np.array([0.0, 1.0, 0.5, 0.2]), split=3))
    np.testing.assert_array_equal(ds.inputs, X)


def test_normalize_rejects_constant_column():
    X = np.array([[1.0, 0.0], [1.0, 2.0], [1.0, 3.0]])
    with pytest.raises(DatasetError, match="column 0"):
        normalize(gas_like(X, np.array([0.0, 1.0, 2.0]), split=2))


def test_denormalize_round_trip():
    raw = build_dataset("wastewater-surrogate")
    back = denormalize(normalize(raw))
    np.testing.assert_allclose(back.inputs, raw.inputs, rtol=0, atol=1e-12)
    np.testing.assert_allclose(back.targets, raw.targets, rtol=0, atol=1e-12)


def test_split_index_bounds():
    with pytest.raises(DatasetError):
        gas_like(np.ones((3, 1)), np.ones(3), split=3)
    with pytest.raises(DatasetError):
        gas_like(np.ones((3, 1)), np.array([1.0, np.inf, 0.0]), split=1)


@pytest.mark.parametrize("name", ["mackey", "gas-surrogate", "wastewater-surrogate"])
def test_write_read_round_trip(tmp_path, name):
    for ds in (build_dataset(name), normalize(build_dataset(name))):
        path = tmp_path / f"{name}.csv"
        write_dataset(ds, path)
        back = read_dataset(path)
        assert np.array_equal(back.inputs, ds.inputs) and np.array_equal(back.targets, ds.targets)
        assert back.split_index == ds.split_index and back.normalization == ds.normalization
        meta = json.loads(path.with_suffix(".json").read_text())
        assert meta["split_index"] == ds.split_index


def test_read_numeric_csv_header_and_blank_lines(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("a,b\n1,2\n\n3,4\n")
    assert read_numeric_csv(path, 2).tolist() == [[1, 2], [3, 4]]
