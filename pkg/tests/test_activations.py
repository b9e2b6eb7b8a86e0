import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from evonet.activations import ActivationKind, activate, activate_derivative
from oracles import SCALAR_ACTIVATIONS, tanh_continued_fraction

finite = st.floats(min_value=-50, max_value=50, allow_nan=False)


def test_five_distinct_members():
    assert len(ActivationKind) == 5
    x = np.linspace(-3, 3, 13)
    values = {kind: tuple(activate(kind, x)) for kind in ActivationKind}
    assert len(set(values.values())) == 5


def test_tags_and_codes_round_trip():
    for kind in ActivationKind:
        assert ActivationKind.from_tag(kind.tag) is kind
        assert ActivationKind.from_code(kind.code) is kind
        assert ActivationKind.from_code(kind.code + 5) is kind
    assert ActivationKind.from_tag("TS") is ActivationKind.TSTAR
    assert ActivationKind.from_tag("LS") is ActivationKind.LSTAR
    with pytest.raises(ValueError):
        ActivationKind.from_tag("Q")


def test_documented_points():
    assert activate(ActivationKind.T, 0.0) == 0.0
    assert activate(ActivationKind.L, 0.0) == 0.5
    assert activate(ActivationKind.S, 0.0) == 0.0
    assert activate(ActivationKind.LSTAR, 0.0) == 0.5


def test_tanh_one_against_continued_fraction():
    reference = float(tanh_continued_fraction("1"))
    assert abs(reference - 0.7615941559557649) < 1e-15
    assert activate(ActivationKind.T, 1.0) == pytest.approx(reference, rel=1e-15)


@pytest.mark.parametrize("kind", list(ActivationKind))
def test_matches_textbook_formula(kind):
    x = np.linspace(-20, 20, 401)
    expected = [SCALAR_ACTIVATIONS[kind.tag](v) for v in x]
    np.testing.assert_allclose(activate(kind, x), expected, rtol=1e-13, atol=1e-15)


@pytest.mark.parametrize("kind", list(ActivationKind))
def test_derivative_matches_finite_differences(kind):
    rng = np.random.default_rng(kind.code)
    x = rng.uniform(-4, 4, 100)
    step = 1e-5
    fd = (activate(kind, x + step) - activate(kind, x - step)) / (2 * step)
    np.testing.assert_allclose(activate_derivative(kind, x), fd, rtol=1e-8, atol=1e-10)


@pytest.mark.parametrize("kind", list(ActivationKind))
@given(x=finite)
def test_bounded(kind, x):
    lo, hi = kind.bounds
    assert lo <= activate(kind, x) <= hi
    assert activate_derivative(kind, x) >= 0.0


@given(x=finite)
def test_scalar_and_array_agree(x):
    for kind in ActivationKind:
        assert kind(x) == activate(kind, np.array([x]))[0]
        assert math.isfinite(kind.derivative(x))
