import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from evonet import kernels
from evonet.activations import ActivationKind
from evonet.network import (
    EvaluationBatch,
    NetworkObjective,
    NetworkPhenotype,
    NetworkShape,
    NumericalOverflowError,
    flatten_params,
    format_architecture,
    forward,
    jacobian,
    n_params,
    parse_architecture,
    predict,
    random_network,
    residuals_and_jacobian,
    rmse,
    sse_and_gradient,
    unflatten_params,
)
from oracles import central_difference, central_difference_jacobian, naive_forward, naive_sse

T, L, S, TS, LS = ActivationKind
KINDS = list(ActivationKind)


def _random_case(rng, d=4, h=None, P=50, scale=1.0):
    h = h or int(rng.integers(1, 17))
    acts = tuple(KINDS[i] for i in rng.integers(0, 5, h))
    shape = NetworkShape(d, acts)
    net = random_network(shape, rng, scale=scale)
    batch = EvaluationBatch(rng.random((P, d)), rng.random(P))
    return net, batch


def test_param_count():
    assert n_params(4, 11) == 11 * 4 + 11 + 11 + 1 == 67
    assert NetworkShape(4, (T,) * 11).n_params == 67


def test_zero_network_outputs_zero():
    for kind in (T, S, TS):
        net = unflatten_params(NetworkShape(3, (kind, kind)), np.zeros(n_params(3, 2)))
        assert forward(net, [0.3, -2.0, 5.0]) == 0.0


def test_constant_logistic_network():
    net = NetworkPhenotype(2, (L,), np.zeros((1, 2)), np.zeros(1), np.array([2.0]), 0.0)
    assert forward(net, [1.0, -1.0]) == 1.0


def test_zero_vector_gives_activation_dependent_constant():
    shape = NetworkShape(2, (L, LS, T))
    net = unflatten_params(shape, np.zeros(shape.n_params))
    assert forward(net, [4.0, 7.0]) == 0.0  # output weights are zero too
    w = np.zeros(shape.n_params)
    w[shape.n_hidden * 3:shape.n_hidden * 3 + 3] = 1.0
    assert forward(unflatten_params(shape, w), [4.0, 7.0]) == 0.5 + 0.5 + 0.0


def test_forward_matches_straight_line_oracle():
    rng = np.random.default_rng(3)
    shape = NetworkShape(3, (T, L, TS, LS))
    net = random_network(shape, rng, scale=1.5)
    w = flatten_params(net)
    tags = [a.tag for a in shape.activations]
    for _ in range(20):
        x = rng.normal(size=3)
        assert forward(net, x) == pytest.approx(naive_forward(3, tags, w, x), rel=1e-13, abs=1e-14)


def test_forward_rejects_wrong_width():
    net = random_network(NetworkShape(3, (T,)), np.random.default_rng(0))
    with pytest.raises(ValueError):
        forward(net, [1.0, 2.0])
    with pytest.raises(ValueError):
        rmse(net, EvaluationBatch(np.ones((4, 2)), np.ones(4)))


def test_batch_validation():
    with pytest.raises(ValueError):
        EvaluationBatch(np.ones((0, 2)), np.ones(0))
    with pytest.raises(ValueError):
        EvaluationBatch(np.ones((3, 2)), np.ones(4))


def test_phenotype_rejects_non_finite():
    with pytest.raises(ValueError):
        NetworkPhenotype(1, (T,), np.array([[np.nan]]), np.zeros(1), np.ones(1), 0.0)


def test_perfect_fit_zero_gradient():
    rng = np.random.default_rng(1)
    net = random_network(NetworkShape(4, (T, S, L)), rng)
    X = rng.random((10, 4))
    s, g = sse_and_gradient(net, EvaluationBatch(X, predict(net, X)))
    assert s == 0.0
    assert np.all(g == 0.0)


def test_single_pattern_gradient_finite_differences():
    net = NetworkPhenotype(1, (T,), np.array([[0.1]]), np.array([-0.05]), np.array([0.2]), 0.03)
    batch = EvaluationBatch(np.array([[0.7]]), np.array([0.4]))
    _, g = sse_and_gradient(net, batch)
    fd = central_difference(lambda w: 0.5 * naive_sse(1, ["T"], w, batch.inputs, batch.targets),
                            flatten_params(net))
    np.testing.assert_allclose(g, fd, rtol=1e-6)


def test_repeating_patterns_doubles_sse_and_gradient():
    net, batch = _random_case(np.random.default_rng(5), h=6, P=20)
    s1, g1 = sse_and_gradient(net, batch)
    s2, g2 = sse_and_gradient(net, batch.repeated(2))
    assert s2 == pytest.approx(2 * s1, rel=1e-14)
    np.testing.assert_allclose(g2, 2 * g1, rtol=1e-13, atol=1e-15)


def test_gradient_matches_finite_differences_random():
    rng = np.random.default_rng(7)
    for _ in range(10):
        net, batch = _random_case(rng)
        obj = NetworkObjective(net.shape, batch)
        _, g = sse_and_gradient(net, batch)
        fd = central_difference(lambda w: 0.5 * obj.sse(w), flatten_params(net))
        np.testing.assert_allclose(g, fd, rtol=1e-5, atol=1e-8)


def test_jacobian_single_pattern_is_gradient():
    net, batch = _random_case(np.random.default_rng(2), h=5, P=1)
    _, g = sse_and_gradient(net, batch)
    e, J = residuals_and_jacobian(net, batch)
    np.testing.assert_allclose(J[0] * e[0], g, rtol=1e-13, atol=1e-16)


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(11)
    for _ in range(5):
        net, batch = _random_case(rng, P=15)
        obj = NetworkObjective(net.shape, batch)
        J = jacobian(net, batch)
        fd = central_difference_jacobian(lambda w: obj.residuals_jacobian(w)[0], flatten_params(net))
        np.testing.assert_allclose(J, fd, rtol=1e-6, atol=1e-9)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_jte_equals_gradient(seed):
    net, batch = _random_case(np.random.default_rng(seed), scale=2.0)
    _, g = sse_and_gradient(net, batch)
    e, J = residuals_and_jacobian(net, batch)
    np.testing.assert_allclose(J.T @ e, g, rtol=1e-12, atol=1e-12 * np.abs(g).max())


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(1, 6), h=st.integers(1, 20))
def test_flatten_unflatten_bijection(seed, d, h):
    rng = np.random.default_rng(seed)
    shape = NetworkShape(d, tuple(KINDS[i] for i in rng.integers(0, 5, h)))
    w = rng.normal(size=shape.n_params)
    net = unflatten_params(shape, w)
    assert np.array_equal(flatten_params(net), w)
    assert unflatten_params(shape, flatten_params(net)) == net


def test_flatten_groups_weights_by_node():
    net = NetworkPhenotype(2, (T, L), np.array([[1.0, 2.0], [4.0, 5.0]]), np.array([3.0, 6.0]),
                           np.array([7.0, 8.0]), 9.0)
    assert flatten_params(net).tolist() == [1, 2, 3, 4, 5, 6, 7, 8, 9]


def test_unflatten_rejects_wrong_length():
    with pytest.raises(ValueError):
        unflatten_params(NetworkShape(4, (T,) * 11), np.zeros(66))


def test_forward_is_pure():
    net, batch = _random_case(np.random.default_rng(4))
    before = flatten_params(net).copy()
    a = predict(net, batch.inputs)
    b = predict(net, batch.inputs)
    assert np.array_equal(a, b)
    assert np.array_equal(flatten_params(net), before)


def test_overflow_reported():
    shape = NetworkShape(1, (T,))
    obj = NetworkObjective(shape, EvaluationBatch(np.ones((2, 1)), np.ones(2)))
    with pytest.raises(NumericalOverflowError):
        obj.sse_grad(np.array([1.0, 0.0, 1e308, 1e308]))


@pytest.mark.skipif("compiled" != kernels.BACKEND, reason="compiled extension not built")
def test_backends_agree():
    rng = np.random.default_rng(9)
    py, cy = kernels.backend("python"), kernels.backend("compiled")
    for _ in range(20):
        net, batch = _random_case(rng, scale=2.0)
        args = (flatten_params(net), net.shape.codes, batch.inputs, batch.targets)
        np.testing.assert_allclose(py.predict(*args[:3]), cy.predict(*args[:3]), rtol=1e-12, atol=1e-13)
        s1, g1 = py.sse_grad(*args)
        s2, g2 = cy.sse_grad(*args)
        assert s1 == pytest.approx(s2, rel=1e-12)
        np.testing.assert_allclose(g1, g2, rtol=1e-10, atol=1e-12)
        e1, J1 = py.residuals_jacobian(*args)
        e2, J2 = cy.residuals_jacobian(*args)
        np.testing.assert_allclose(e1, e2, rtol=1e-12, atol=1e-13)
        np.testing.assert_allclose(J1, J2, rtol=1e-12, atol=1e-13)


def test_use_backend_switches_and_restores():
    previous = kernels.use_backend("python")
    try:
        assert kernels.BACKEND == "python"
        net, batch = _random_case(np.random.default_rng(0))
        r = rmse(net, batch)
    finally:
        kernels.use_backend(previous)
    assert rmse(net, batch) == pytest.approx(r, rel=1e-12)


@pytest.mark.parametrize("text, expected", [
    ("8 T, 2 T*, 1 L*", (T,) * 8 + (TS,) * 2 + (LS,)),
    ("7 T, 3 L", (T,) * 7 + (L,) * 3),
    ("24 TS", (TS,) * 24),
    ("1 LS,2 S", (LS, S, S)),
])
def test_parse_architecture(text, expected):
    assert parse_architecture(text) == expected


@pytest.mark.parametrize("text", ["0 T", "3 Q", "", "T 3", "2 T,, 1 L", "-1 T"])
def test_parse_architecture_rejects(text):
    with pytest.raises(ValueError, match="COUNT TAG"):
        parse_architecture(text)


def test_format_architecture_round_trip():
    acts = (LS, T, TS, T, L)
    text = format_architecture(acts)
    assert text == "2 T, 1 L, 1 T*, 1 L*"
    assert sorted(parse_architecture(text), key=lambda k: k.code) == sorted(acts, key=lambda k: k.code)
