"""Single-hidden-layer feedforward networks with a linear output neuron.

Parameters are flattened in a fixed order that keeps the weights feeding the
same neuron together: for each hidden neuron its input weights and then its
bias, followed by the output weights and finally the output bias. A network
with ``d`` inputs and ``h`` hidden neurons therefore has
``h * (d + 1) + h + 1`` parameters.

The training loss is ``SSE / 2``; every gradient and Jacobian in this module
is taken with respect to it. Reported errors are ``RMSE = sqrt(SSE / P)``.
"""
from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .activations import ActivationKind


class NumericalOverflowError(ArithmeticError):
    """A forward or backward pass produced a non-finite value."""


def n_params(n_inputs: int, n_hidden: int) -> int:
    return n_hidden * (n_inputs + 1) + n_hidden + 1


@dataclass(frozen=True)
class NetworkShape:
    n_inputs: int
    activations: tuple[ActivationKind, ...]

    def __post_init__(self):
        if self.n_inputs < 1:
            raise ValueError("a network needs at least one input")
        if len(self.activations) < 1:
            raise ValueError("a network needs at least one hidden neuron")
        object.__setattr__(self, "activations", tuple(self.activations))

    @property
    def n_hidden(self) -> int:
        return len(self.activations)

    @property
    def n_params(self) -> int:
        return n_params(self.n_inputs, self.n_hidden)

    @property
    def codes(self) -> np.ndarray:
        return np.array([k.code for k in self.activations], dtype=np.intp)

    @property
    def architecture(self) -> str:
        return format_architecture(self.activations)


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class NetworkPhenotype:
    """A decoded network. Arrays are copied and made read-only on construction."""

    n_inputs: int
    activations: tuple[ActivationKind, ...]
    hidden_weights: np.ndarray
    hidden_biases: np.ndarray
    output_weights: np.ndarray
    output_bias: float

    def __post_init__(self):
        acts = tuple(self.activations)
        h = len(acts)
        if h < 1:
            raise ValueError("a network needs at least one hidden neuron")
        hw = _frozen(self.hidden_weights).reshape(h, self.n_inputs)
        hb = _frozen(self.hidden_biases).reshape(h)
        ow = _frozen(self.output_weights).reshape(h)
        ob = float(self.output_bias)
        for arr in (hw, hb, ow):
            if not np.all(np.isfinite(arr)):
                raise ValueError("network weights must be finite")
        if not math.isfinite(ob):
            raise ValueError("network weights must be finite")
        object.__setattr__(self, "activations", acts)
        object.__setattr__(self, "hidden_weights", hw)
        object.__setattr__(self, "hidden_biases", hb)
        object.__setattr__(self, "output_weights", ow)
        object.__setattr__(self, "output_bias", ob)

    @property
    def shape(self) -> NetworkShape:
        return NetworkShape(self.n_inputs, self.activations)

    @property
    def n_hidden(self) -> int:
        return len(self.activations)

    @property
    def n_params(self) -> int:
        return n_params(self.n_inputs, self.n_hidden)

    @property
    def architecture(self) -> str:
        return format_architecture(self.activations)

    def __eq__(self, other):
        if not isinstance(other, NetworkPhenotype):
            return NotImplemented
        return (
            self.n_inputs == other.n_inputs
            and self.activations == other.activations
            and np.array_equal(flatten_params(self), flatten_params(other))
        )

    def __hash__(self):
        return hash((self.n_inputs, self.activations, flatten_params(self).tobytes()))


@dataclass(frozen=True, eq=False)
class EvaluationBatch:
    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        X = np.ascontiguousarray(self.inputs, dtype=np.float64)
        t = np.ascontiguousarray(self.targets, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2 or t.ndim != 1:
            raise ValueError("inputs must be P x d and targets length P")
        if X.shape[0] < 1:
            raise ValueError("a batch needs at least one pattern")
        if X.shape[0] != t.shape[0]:
            raise ValueError(f"{X.shape[0]} input rows but {t.shape[0]} targets")
        X.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "inputs", X)
        object.__setattr__(self, "targets", t)

    def __len__(self) -> int:
        return self.inputs.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.inputs.shape[1]

    def repeated(self, times: int) -> "EvaluationBatch":
        return EvaluationBatch(np.tile(self.inputs, (times, 1)), np.tile(self.targets, times))


def flatten_params(net: NetworkPhenotype) -> np.ndarray:
    block = np.hstack([net.hidden_weights, net.hidden_biases[:, None]])
    return np.concatenate([block.ravel(), net.output_weights, [net.output_bias]])


def unflatten_params(shape: NetworkShape, vector) -> NetworkPhenotype:
    w = np.asarray(vector, dtype=np.float64)
    if w.ndim != 1 or w.shape[0] != shape.n_params:
        raise ValueError(
            f"expected {shape.n_params} parameters for {shape.n_inputs} inputs and "
            f"{shape.n_hidden} hidden neurons, got {w.size}"
        )
    h, d = shape.n_hidden, shape.n_inputs
    block = w[:h * (d + 1)].reshape(h, d + 1)
    return NetworkPhenotype(
        n_inputs=d,
        activations=shape.activations,
        hidden_weights=block[:, :d],
        hidden_biases=block[:, d],
        output_weights=w[h * (d + 1):h * (d + 1) + h],
        output_bias=w[-1],
    )


def random_network(shape: NetworkShape, rng: np.random.Generator, scale: float = 0.3) -> NetworkPhenotype:
    """Network with every weight drawn uniformly from ``[-scale, scale]``."""
    return unflatten_params(shape, rng.uniform(-scale, scale, shape.n_params))


def _check_batch(net: NetworkPhenotype, batch: EvaluationBatch):
    if batch.n_inputs != net.n_inputs:
        raise ValueError(f"batch has {batch.n_inputs} input columns, network expects {net.n_inputs}")


def forward(net: NetworkPhenotype, x) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.n_inputs,):
        raise ValueError(f"input has shape {x.shape}, network expects ({net.n_inputs},)")
    return float(predict(net, x.reshape(1, -1))[0])


def predict(net: NetworkPhenotype, inputs) -> np.ndarray:
    X = np.ascontiguousarray(inputs, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != net.n_inputs:
        raise ValueError(f"inputs must be P x {net.n_inputs}")
    y = kernels.predict(flatten_params(net), net.shape.codes, X)
    if not np.all(np.isfinite(y)):
        raise NumericalOverflowError("non-finite network output")
    return y


def rmse(net: NetworkPhenotype, batch: EvaluationBatch) -> float:
    _check_batch(net, batch)
    e = predict(net, batch.inputs) - batch.targets
    return math.sqrt(float(e @ e) / len(batch))


def sse_and_gradient(net: NetworkPhenotype, batch: EvaluationBatch) -> tuple[float, np.ndarray]:
    """Sum of squared errors and the gradient of ``SSE / 2``."""
    _check_batch(net, batch)
    return NetworkObjective(net.shape, batch).sse_grad(flatten_params(net))


def residuals_and_jacobian(net: NetworkPhenotype, batch: EvaluationBatch) -> tuple[np.ndarray, np.ndarray]:
    _check_batch(net, batch)
    return NetworkObjective(net.shape, batch).residuals_jacobian(flatten_params(net))


def jacobian(net: NetworkPhenotype, batch: EvaluationBatch) -> np.ndarray:
    """``P x W`` matrix of residual derivatives, ``J[p, i] = d(y_p - t_p) / dw_i``."""
    return residuals_and_jacobian(net, batch)[1]


class NetworkObjective:
    """Least-squares objective over a flat parameter vector for one network shape.

    This is the interface the trainers consume; any object providing
    ``n_params``, ``n_patterns``, ``sse``, ``sse_grad`` and
    ``residuals_jacobian`` can be trained.
    """

    def __init__(self, shape: NetworkShape, batch: EvaluationBatch):
        if batch.n_inputs != shape.n_inputs:
            raise ValueError(f"batch has {batch.n_inputs} input columns, network expects {shape.n_inputs}")
        self.shape = shape
        self.codes = shape.codes
        self.X = batch.inputs
        self.t = batch.targets
        self.n_params = shape.n_params
        self.n_patterns = len(batch)

    def sse(self, w: np.ndarray) -> float:
        return kernels.sse(w, self.codes, self.X, self.t)

    def sse_grad(self, w: np.ndarray) -> tuple[float, np.ndarray]:
        s, g = kernels.sse_grad(w, self.codes, self.X, self.t)
        if not (math.isfinite(s) and np.all(np.isfinite(g))):
            raise NumericalOverflowError("non-finite error or gradient")
        return s, g

    def residuals_jacobian(self, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        e, J = kernels.residuals_jacobian(w, self.codes, self.X, self.t)
        if not (np.all(np.isfinite(e)) and np.all(np.isfinite(J))):
            raise NumericalOverflowError("non-finite residual or Jacobian")
        return e, J


_ARCH_TERM = re.compile(r"^\s*(\d+)\s*([A-Za-z]+\*?)\s*$")
ARCHITECTURE_GRAMMAR = 'comma-separated "COUNT TAG" terms, TAG in {T, L, S, T*, L*}, e.g. "8 T, 2 T*, 1 L*"'


def parse_architecture(text: str) -> tuple[ActivationKind, ...]:
    """Parse ``"8 T, 2 T*, 1 L*"`` into a tuple of per-neuron activations."""
    kinds: list[ActivationKind] = []
    terms = [t for t in text.split(",")]
    if not text.strip():
        raise ValueError(f"empty architecture string; expected {ARCHITECTURE_GRAMMAR}")
    for term in terms:
        m = _ARCH_TERM.match(term)
        if m is None:
            raise ValueError(f"cannot parse architecture term {term!r}; expected {ARCHITECTURE_GRAMMAR}")
        count = int(m.group(1))
        try:
            kind = ActivationKind.from_tag(m.group(2))
        except ValueError as exc:
            raise ValueError(f"{exc}; architecture grammar: {ARCHITECTURE_GRAMMAR}") from None
        if count < 1:
            raise ValueError(f"neuron count must be at least 1 in term {term.strip()!r}; expected {ARCHITECTURE_GRAMMAR}")
        kinds.extend([kind] * count)
    return tuple(kinds)


def format_architecture(activations: Sequence[ActivationKind]) -> str:
    counts = Counter(activations)
    return ", ".join(f"{counts[k]} {k.tag}" for k in ActivationKind if counts[k])
