"""Compare the compiled and numpy kernel backends.

Times the three network kernels over a range of hidden-layer sizes and one
complete Levenberg-Marquardt training on the Mackey-Glass data, checks that
both backends agree, and prints a table of timings and speed-ups::

    python benchmarks/bench_kernels.py [--repeats 200] [--epochs 200]
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from evonet import kernels
from evonet.activations import ActivationKind
from evonet.datasets import build_dataset, normalize
from evonet.network import NetworkShape, n_params, random_network
from evonet.trainers import TrainerKind, TrainerSpec, train


def _per_call(fn, repeats: int) -> float:
    return min(timeit.repeat(fn, number=repeats, repeat=3)) / repeats


def bench_kernels(sizes, n_patterns: int, repeats: int, rng) -> list[tuple]:
    rows = []
    d = 4
    X = rng.random((n_patterns, d))
    t = rng.random(n_patterns)
    for h in sizes:
        w = rng.uniform(-0.5, 0.5, n_params(d, h))
        codes = np.arange(h, dtype=np.intp) % 5
        for name in ("predict", "sse_grad", "residuals_jacobian"):
            args = (w, codes, X) if name == "predict" else (w, codes, X, t)
            times = {}
            outputs = {}
            for b in ("python", "compiled"):
                fn = getattr(kernels.backend(b), name)
                outputs[b] = fn(*args)
                times[b] = _per_call(lambda: fn(*args), repeats)
            _check_same(outputs["python"], outputs["compiled"])
            rows.append((f"{name} h={h}", times["python"], times["compiled"]))
    return rows


def _check_same(a, b):
    a = a if isinstance(a, tuple) else (a,)
    b = b if isinstance(b, tuple) else (b,)
    for x, y in zip(a, b):
        np.testing.assert_allclose(x, y, rtol=1e-10, atol=1e-12)


def bench_training(epochs: int) -> tuple:
    ds = normalize(build_dataset("mackey"))
    shape = NetworkShape(4, (ActivationKind.T,) * 8 + (ActivationKind.TSTAR,) * 2 + (ActivationKind.LSTAR,))
    net = random_network(shape, np.random.default_rng(0))
    spec = TrainerSpec.default(TrainerKind.LM)
    times, finals = {}, {}
    for b in ("python", "compiled"):
        previous = kernels.use_backend(b)
        try:
            times[b] = min(timeit.repeat(lambda: train(net, ds.train, spec, epochs), number=1, repeat=3))
            finals[b] = train(net, ds.train, spec, epochs).epoch_rmse[-1]
        finally:
            kernels.use_backend(previous)
    return (f"LM training, 11 hidden, {epochs} epochs", times["python"], times["compiled"],
            abs(finals["python"] - finals["compiled"]))


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    parser.add_argument("--repeats", type=int, default=200)
    parser.add_argument("--patterns", type=int, default=500)
    parser.add_argument("--epochs", type=int, default=200)
    args = parser.parse_args(argv)
    try:
        kernels.backend("compiled")
    except ImportError:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation`")

    rows = bench_kernels((1, 4, 16, 24), args.patterns, args.repeats, np.random.default_rng(1))
    print(f"{'kernel':<28}{'python':>12}{'compiled':>12}{'speed-up':>10}")
    for name, tp, tc in rows:
        print(f"{name:<28}{tp * 1e6:>10.1f}us{tc * 1e6:>10.1f}us{tp / tc:>9.2f}x")
    name, tp, tc, diff = bench_training(args.epochs)
    print(f"{name:<28}{tp:>11.3f}s{tc:>11.3f}s{tp / tc:>9.2f}x")
    print(f"final training RMSE difference between backends: {diff:.2e}")


if __name__ == "__main__":
    main()
