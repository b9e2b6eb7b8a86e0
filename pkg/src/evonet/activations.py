"""Hidden-neuron transfer functions.

Five bounded, smooth squashing functions are available. Every one is written
in terms of ``tanh`` so that no branch can overflow:

====  =====================  ==========================  ===========
tag   name                   formula                     range
====  =====================  ==========================  ===========
T     tanh                   tanh(x)                     (-1, 1)
L     logistic               1 / (1 + exp(-x))           (0, 1)
S     bipolar sigmoid        2 / (1 + exp(-x)) - 1       (-1, 1)
T*    scaled tanh            1.7159 tanh(2x/3)           (-1.7159, 1.7159)
L*    steep logistic         1 / (1 + exp(-2x))          (0, 1)
====  =====================  ==========================  ===========

The integer ``code`` of each member is what the compiled kernels and the
genome activation genes use.
"""
from __future__ import annotations

import enum

import numpy as np

SCALED_TANH_GAIN = 1.7159
SCALED_TANH_SLOPE = 2.0 / 3.0


class ActivationKind(enum.Enum):
    T = 0
    L = 1
    S = 2
    TSTAR = 3
    LSTAR = 4

    @property
    def code(self) -> int:
        return self.value

    @property
    def tag(self) -> str:
        return _TAGS[self]

    @classmethod
    def from_tag(cls, tag: str) -> "ActivationKind":
        """Parse an architecture tag; ``TS``/``LS`` are accepted for ``T*``/``L*``."""
        key = tag.strip().upper()
        try:
            return _BY_TAG[key]
        except KeyError:
            raise ValueError(
                f"unknown activation tag {tag!r}; expected one of T, L, S, T*, L*"
            ) from None

    @classmethod
    def from_code(cls, code: int) -> "ActivationKind":
        return cls(int(code) % 5)

    @property
    def bounds(self) -> tuple[float, float]:
        return _BOUNDS[self]

    def __call__(self, x):
        return activate(self, x)

    def derivative(self, x):
        return activate_derivative(self, x)

    def __str__(self) -> str:
        return self.tag


_TAGS = {
    ActivationKind.T: "T",
    ActivationKind.L: "L",
    ActivationKind.S: "S",
    ActivationKind.TSTAR: "T*",
    ActivationKind.LSTAR: "L*",
}
_BY_TAG = {tag: kind for kind, tag in _TAGS.items()}
_BY_TAG.update({"TS": ActivationKind.TSTAR, "LS": ActivationKind.LSTAR})
_BOUNDS = {
    ActivationKind.T: (-1.0, 1.0),
    ActivationKind.L: (0.0, 1.0),
    ActivationKind.S: (-1.0, 1.0),
    ActivationKind.TSTAR: (-SCALED_TANH_GAIN, SCALED_TANH_GAIN),
    ActivationKind.LSTAR: (0.0, 1.0),
}


def activate(kind: ActivationKind, x):
    """Evaluate the transfer function of ``kind`` (scalar or array)."""
    if kind is ActivationKind.T:
        return np.tanh(x)
    if kind is ActivationKind.L:
        return 0.5 * (1.0 + np.tanh(0.5 * x))
    if kind is ActivationKind.S:
        return np.tanh(0.5 * x)
    if kind is ActivationKind.TSTAR:
        return SCALED_TANH_GAIN * np.tanh(SCALED_TANH_SLOPE * x)
    if kind is ActivationKind.LSTAR:
        return 0.5 * (1.0 + np.tanh(x))
    raise TypeError(f"not an ActivationKind: {kind!r}")


def activate_derivative(kind: ActivationKind, x):
    """Exact first derivative of :func:`activate`."""
    if kind is ActivationKind.T:
        t = np.tanh(x)
        return 1.0 - t * t
    if kind is ActivationKind.L:
        t = np.tanh(0.5 * x)
        return 0.25 * (1.0 - t * t)
    if kind is ActivationKind.S:
        t = np.tanh(0.5 * x)
        return 0.5 * (1.0 - t * t)
    if kind is ActivationKind.TSTAR:
        t = np.tanh(SCALED_TANH_SLOPE * x)
        return SCALED_TANH_GAIN * SCALED_TANH_SLOPE * (1.0 - t * t)
    if kind is ActivationKind.LSTAR:
        t = np.tanh(x)
        return 0.5 * (1.0 - t * t)
    raise TypeError(f"not an ActivationKind: {kind!r}")


# Every activation is ``offset + gain * tanh(slope * x)`` with derivative
# ``dgain * (1 - tanh(slope * x) ** 2)``; the kernels index these by code.
TANH_SLOPE = np.array([1.0, 0.5, 0.5, SCALED_TANH_SLOPE, 1.0])
TANH_OFFSET = np.array([0.0, 0.5, 0.0, 0.0, 0.5])
TANH_GAIN = np.array([1.0, 0.5, 1.0, SCALED_TANH_GAIN, 0.5])
TANH_DGAIN = np.array([1.0, 0.25, 0.5, SCALED_TANH_GAIN * SCALED_TANH_SLOPE, 0.5])
