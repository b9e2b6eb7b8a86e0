"""Batch local-search trainers: BP, SCG, QNA and LM.

All four share one contract. They take an objective (normally a
:class:`~evonet.network.NetworkObjective`), a starting parameter vector, a
:class:`TrainerSpec` and an epoch budget. They return a :class:`TrainingResult`
whose ``epoch_rmse`` holds the training RMSE after every epoch.

The error being minimised is ``E = SSE / 2``. An objective is any object
exposing ``n_params``, ``n_patterns``, ``sse(w)``, ``sse_grad(w)`` (SSE and
the gradient of ``E``) and ``residuals_jacobian(w)``.
"""
from __future__ import annotations

import enum
import sys
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .network import (
    EvaluationBatch,
    NetworkObjective,
    NetworkPhenotype,
    NetworkShape,
    NumericalOverflowError,
    flatten_params,
    unflatten_params,
)

GRAD_TOL = 1e-10
SSE_TOL = 1e-14
LM_MU_FACTOR = 10.0
LM_MU_MAX = 1e10
LM_MU_MIN = sys.float_info.min  # keeps mu from underflowing to 0, where x10 could never recover
QNA_MAX_BACKTRACKS = 50
SCG_MIN_SIGMA = 1e-8
SCG_LAMBDA_MAX = 1e100


class TrainerKind(enum.Enum):
    BP = 0
    SCG = 1
    QNA = 2
    LM = 3

    @classmethod
    def parse(cls, name: str) -> "TrainerKind":
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown trainer {name!r}; expected one of bp, scg, qna, lm") from None


class ParamRange(NamedTuple):
    name: str
    low: float
    high: float


PARAM_RANGES: dict[TrainerKind, tuple[ParamRange, ...]] = {
    TrainerKind.BP: (
        ParamRange("learning_rate", 0.05, 0.25),
        ParamRange("momentum", 0.05, 0.25),
    ),
    TrainerKind.SCG: (
        ParamRange("sigma", 0.0, 1e-4),
        ParamRange("lambda_init", 0.0, 1e-6),
    ),
    TrainerKind.QNA: (
        ParamRange("initial_step", 1e-6, 100.0),
        ParamRange("max_rel_step", 0.1, 0.6),
        ParamRange("armijo_c", 0.001, 0.003),
        ParamRange("contraction", 0.1, 0.4),
    ),
    TrainerKind.LM: (ParamRange("mu_init", 0.001, 0.02),),
}
MAX_PARAMS = max(len(r) for r in PARAM_RANGES.values())

DEFAULT_PARAMS: dict[TrainerKind, tuple[float, ...]] = {
    TrainerKind.BP: (0.15, 0.15),
    TrainerKind.SCG: (5e-5, 5e-7),
    TrainerKind.QNA: (1.0, 0.35, 0.002, 0.25),
    TrainerKind.LM: (0.01,),
}


@dataclass(frozen=True)
class TrainerSpec:
    kind: TrainerKind
    params: tuple[float, ...]

    def __post_init__(self):
        ranges = PARAM_RANGES[self.kind]
        params = tuple(float(p) for p in self.params)
        if len(params) != len(ranges):
            raise ValueError(f"{self.kind.name} takes {len(ranges)} parameters, got {len(params)}")
        for value, r in zip(params, ranges):
            if not r.low <= value <= r.high:
                raise ValueError(f"{self.kind.name} {r.name}={value!r} outside [{r.low}, {r.high}]")
        object.__setattr__(self, "params", params)

    @classmethod
    def default(cls, kind: TrainerKind) -> "TrainerSpec":
        return cls(kind, DEFAULT_PARAMS[kind])

    @classmethod
    def from_dict(cls, kind: TrainerKind, values: dict[str, float]) -> "TrainerSpec":
        """Defaults overridden by ``values``; unknown names are rejected."""
        names = [r.name for r in PARAM_RANGES[kind]]
        unknown = set(values) - set(names)
        if unknown:
            raise ValueError(f"{kind.name} has no parameter(s) {sorted(unknown)}; known: {names}")
        base = dict(zip(names, DEFAULT_PARAMS[kind]))
        base.update(values)
        return cls(kind, tuple(base[n] for n in names))

    def as_dict(self) -> dict[str, float]:
        return {r.name: v for r, v in zip(PARAM_RANGES[self.kind], self.params)}

    def __getitem__(self, name: str) -> float:
        return self.as_dict()[name]


class Termination(str, enum.Enum):
    BUDGET_EXHAUSTED = "budget_exhausted"
    CONVERGED = "converged"
    NUMERICAL_FAILURE = "numerical_failure"


@dataclass
class TrainingResult:
    final_params: np.ndarray
    epoch_rmse: list[float]
    epochs_used: int
    termination: Termination
    restarts: int = 0
    extra: dict = field(default_factory=dict)

    def network(self, shape: NetworkShape) -> NetworkPhenotype:
        return unflatten_params(shape, self.final_params)


class LinearObjective:
    """Linear least squares ``|A w - t|^2``; used as a closed-form test bed."""

    def __init__(self, A, t):
        self.A = np.ascontiguousarray(A, dtype=np.float64)
        self.t = np.ascontiguousarray(t, dtype=np.float64)
        self.n_patterns, self.n_params = self.A.shape

    def sse(self, w):
        e = self.A @ w - self.t
        return float(e @ e)

    def sse_grad(self, w):
        e = self.A @ w - self.t
        return float(e @ e), self.A.T @ e

    def residuals_jacobian(self, w):
        return self.A @ w - self.t, self.A

    def solution(self) -> np.ndarray:
        return np.linalg.solve(self.A.T @ self.A, self.A.T @ self.t)


def _converged(sse: float, grad: np.ndarray) -> bool:
    return sse < SSE_TOL or float(np.max(np.abs(grad))) < GRAD_TOL


def _rmse(sse: float, n: int) -> float:
    return math.sqrt(sse / n)


def _safe_sse(obj, w) -> float:
    try:
        s = obj.sse(w)
    except (NumericalOverflowError, FloatingPointError):
        return math.inf
    return s if math.isfinite(s) else math.inf


def _result(w, trace, term, **kw) -> TrainingResult:
    return TrainingResult(np.array(w, dtype=np.float64), trace, len(trace), term, **kw)


def bp_descent(obj, w0, spec: TrainerSpec, epochs: int) -> TrainingResult:
    """Full-batch gradient descent with momentum.

    The step uses the pattern-averaged gradient, ``g / P``, so that one
    learning-rate range suits every dataset size:
    ``dw_t = -lr * g_t / P + momentum * dw_{t-1}``.
    """
    lr, momentum = spec.params
    w = np.array(w0, dtype=np.float64)
    P = obj.n_patterns
    trace: list[float] = []
    if epochs <= 0:
        return _result(w, trace, Termination.BUDGET_EXHAUSTED)
    try:
        s, g = obj.sse_grad(w)
    except NumericalOverflowError:
        return _result(w, trace, Termination.NUMERICAL_FAILURE)
    best_w, best_s = w.copy(), s
    step = np.zeros_like(w)
    term = Termination.BUDGET_EXHAUSTED
    for _ in range(epochs):
        if _converged(s, g):
            term = Termination.CONVERGED
            break
        step = -lr * (g / P) + momentum * step
        w_new = w + step
        try:
            s, g = obj.sse_grad(w_new)
        except NumericalOverflowError:
            return _result(best_w, trace, Termination.NUMERICAL_FAILURE)
        w = w_new
        if s < best_s:
            best_w, best_s = w.copy(), s
        trace.append(_rmse(s, P))
    return _result(w, trace, term)


def scg_descent(obj, w0, spec: TrainerSpec, epochs: int) -> TrainingResult:
    """Scaled conjugate gradient (Moller).

    Curvature along the search direction comes from a finite difference of
    gradients with perturbation ``sigma / |p|``; ``lambda`` regularises an
    indefinite Hessian and is adapted from the ratio of actual to predicted
    reduction. Directions restart every ``n_params`` successful steps.
    Training stops as converged once ``lambda`` exceeds 1e100.
    """
    sigma0 = max(spec["sigma"], SCG_MIN_SIGMA)
    lam = spec["lambda_init"]
    lam_bar = 0.0
    w = np.array(w0, dtype=np.float64)
    P = obj.n_patterns
    N = obj.n_params
    trace: list[float] = []
    if epochs <= 0:
        return _result(w, trace, Termination.BUDGET_EXHAUSTED)
    try:
        s, g = obj.sse_grad(w)
    except NumericalOverflowError:
        return _result(w, trace, Termination.NUMERICAL_FAILURE)
    r = -g
    p = r.copy()
    success = True
    delta = 0.0
    n_success = 0
    restarts = 0
    term = Termination.BUDGET_EXHAUSTED
    for _ in range(epochs):
        if _converged(s, g):
            term = Termination.CONVERGED
            break
        p2 = float(p @ p)
        mu = float(p @ r)
        if not (p2 > 0.0 and mu > 0.0 and math.isfinite(p2)):
            # lost conjugacy: fall back to steepest descent
            p = r.copy()
            p2 = float(p @ p)
            mu = p2
            success = True
            restarts += 1
        if success:
            sig = sigma0 / math.sqrt(p2)
            try:
                _, g_sig = obj.sse_grad(w + sig * p)
            except NumericalOverflowError:
                return _result(w, trace, Termination.NUMERICAL_FAILURE, restarts=restarts)
            delta = float(p @ (g_sig - g)) / sig
        delta += (lam - lam_bar) * p2
        if delta <= 0.0:
            lam_bar = 2.0 * (lam - delta / p2)
            delta = -delta + lam * p2
            lam = lam_bar
        alpha = mu / delta
        w_new = w + alpha * p
        s_new = _safe_sse(obj, w_new)
        comparison = 2.0 * delta * (s / 2.0 - s_new / 2.0) / (mu * mu) if math.isfinite(s_new) else -1.0
        if comparison >= 0.0:
            try:
                s_new, g_new = obj.sse_grad(w_new)
            except NumericalOverflowError:
                return _result(w, trace, Termination.NUMERICAL_FAILURE, restarts=restarts)
            r_new = -g_new
            lam_bar = 0.0
            success = True
            n_success += 1
            if n_success % N == 0:
                p = r_new.copy()
            else:
                beta = (float(r_new @ r_new) - float(r_new @ r)) / mu
                p = r_new + beta * p
            w, s, g, r = w_new, s_new, g_new, r_new
            if comparison >= 0.75:
                lam = lam / 4.0
        else:
            lam_bar = lam
            success = False
        if comparison < 0.25:
            lam = lam + delta * (1.0 - comparison) / p2
        trace.append(_rmse(s, P))
        if not lam <= SCG_LAMBDA_MAX:
            # no representable decrease left along any direction
            term = Termination.CONVERGED
            break
    return _result(w, trace, term, restarts=restarts)


def bfgs_update(H: np.ndarray, s: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Inverse-Hessian BFGS update; returns ``H`` itself when ``s.y <= 0``."""
    sy = float(s @ y)
    if not sy > 1e-12 * float(np.linalg.norm(s) * np.linalg.norm(y)):
        return H
    Hy = H @ y
    yHy = float(y @ Hy)
    return H + ((sy + yHy) / (sy * sy)) * np.outer(s, s) - (np.outer(Hy, s) + np.outer(s, Hy)) / sy


def qna_descent(obj, w0, spec: TrainerSpec, epochs: int) -> TrainingResult:
    """BFGS quasi-Newton with Armijo backtracking.

    Each line search starts from ``initial_step``, shortened so that the
    trial move is at most ``max_rel_step * max(|w|, 1)``. A trial is accepted
    when ``E`` falls by at least ``armijo_c * step * |g.d|``; otherwise the
    step is multiplied by ``contraction``. After 50 failed trials the epoch
    is abandoned and the inverse Hessian reset to the identity; if that
    happens along the steepest-descent direction training stops as converged.
    A line search whose shortest trial still overflows is a numerical failure.
    """
    initial_step, max_rel, c, contraction = spec.params
    w = np.array(w0, dtype=np.float64)
    P = obj.n_patterns
    n = obj.n_params
    trace: list[float] = []
    if epochs <= 0:
        return _result(w, trace, Termination.BUDGET_EXHAUSTED)
    try:
        s, g = obj.sse_grad(w)
    except NumericalOverflowError:
        return _result(w, trace, Termination.NUMERICAL_FAILURE)
    H = np.eye(n)
    fresh = True
    resets = skipped = 0
    term = Termination.BUDGET_EXHAUSTED
    for _ in range(epochs):
        if _converged(s, g):
            term = Termination.CONVERGED
            break
        d = -(H @ g)
        gd = float(g @ d)
        if not gd < 0.0:
            H = np.eye(n)
            fresh = True
            d = -g
            gd = float(g @ d)
        step = min(initial_step, max_rel * max(float(np.linalg.norm(w)), 1.0) / float(np.linalg.norm(d)))
        accepted = False
        s_new = math.inf
        for _ in range(QNA_MAX_BACKTRACKS):
            w_new = w + step * d
            s_new = _safe_sse(obj, w_new)
            if (s - s_new) / 2.0 >= c * step * abs(gd):
                accepted = True
                break
            step *= contraction
        if not accepted and not math.isfinite(s_new):
            # even the shortest trial step overflowed
            return _result(w, trace, Termination.NUMERICAL_FAILURE, restarts=resets,
                           extra={"skipped_updates": skipped})
        if accepted:
            try:
                s_new, g_new = obj.sse_grad(w_new)
            except NumericalOverflowError:
                return _result(w, trace, Termination.NUMERICAL_FAILURE)
            H_next = bfgs_update(H, w_new - w, g_new - g)
            if H_next is H:
                skipped += 1
            else:
                fresh = False
            H = H_next
            w, s, g = w_new, s_new, g_new
        else:
            trace.append(_rmse(s, P))
            if fresh:
                # steepest descent found no decrease either: roundoff floor
                term = Termination.CONVERGED
                break
            H = np.eye(n)
            fresh = True
            resets += 1
            continue
        trace.append(_rmse(s, P))
    return _result(w, trace, term, restarts=resets, extra={"skipped_updates": skipped})


def lm_step(jtj: np.ndarray, jte: np.ndarray, mu: float) -> np.ndarray:
    """Solve ``(J^T J + mu I) delta = -J^T e`` by Cholesky.

    Raises :class:`scipy.linalg.LinAlgError` when the damped system is not
    positive definite.
    """
    A = jtj + mu * np.eye(jtj.shape[0])
    factor = cho_factor(A, lower=True, check_finite=False)
    delta = cho_solve(factor, -jte, check_finite=False)
    if not np.all(np.isfinite(delta)):
        raise LinAlgError("non-finite Levenberg-Marquardt step")
    return delta


def lm_descent(obj, w0, spec: TrainerSpec, epochs: int) -> TrainingResult:
    """Levenberg-Marquardt with multiplicative damping control.

    An epoch solves the damped normal equations, multiplying ``mu`` by 10
    and re-solving until the SSE decreases; the accepted step then divides
    ``mu`` by 10. A singular system counts as a rejection. Once ``mu`` passes
    1e10 the trust region has collapsed and training stops as converged
    (or as a numerical failure if even that smallest step overflowed).
    """
    mu = spec["mu_init"]
    w = np.array(w0, dtype=np.float64)
    P = obj.n_patterns
    trace: list[float] = []
    if epochs <= 0:
        return _result(w, trace, Termination.BUDGET_EXHAUSTED)
    try:
        e, J = obj.residuals_jacobian(w)
    except NumericalOverflowError:
        return _result(w, trace, Termination.NUMERICAL_FAILURE)
    s = float(e @ e)
    term = Termination.BUDGET_EXHAUSTED
    for _ in range(epochs):
        jte = J.T @ e
        if _converged(s, jte):
            term = Termination.CONVERGED
            break
        jtj = J.T @ J
        w_new = None
        s_new = math.inf
        while mu <= LM_MU_MAX:
            try:
                candidate = w + lm_step(jtj, jte, mu)
            except LinAlgError:
                mu *= LM_MU_FACTOR
                continue
            s_new = _safe_sse(obj, candidate)
            if s_new < s:
                w_new = candidate
                mu = max(mu / LM_MU_FACTOR, LM_MU_MIN)
                break
            mu *= LM_MU_FACTOR
        if w_new is None:
            # a finite but non-decreasing last trial means the trust region collapsed;
            # an overflowing one, that the error cannot be evaluated near w
            term = Termination.CONVERGED if math.isfinite(s_new) else Termination.NUMERICAL_FAILURE
            break
        try:
            e, J = obj.residuals_jacobian(w_new)
        except NumericalOverflowError:
            return _result(w, trace, Termination.NUMERICAL_FAILURE)
        w = w_new
        s = float(e @ e)
        trace.append(_rmse(s, P))
    return _result(w, trace, term, extra={"mu": mu})


_DESCENT = {
    TrainerKind.BP: bp_descent,
    TrainerKind.SCG: scg_descent,
    TrainerKind.QNA: qna_descent,
    TrainerKind.LM: lm_descent,
}


def train_objective(obj, w0, spec: TrainerSpec, epochs: int) -> TrainingResult:
    return _DESCENT[spec.kind](obj, w0, spec, epochs)


def _network_call(kind: TrainerKind, net: NetworkPhenotype, batch: EvaluationBatch,
                  spec: TrainerSpec, epochs: int) -> TrainingResult:
    if spec.kind is not kind:
        raise ValueError(f"expected a {kind.name} spec, got {spec.kind.name}")
    return _DESCENT[kind](NetworkObjective(net.shape, batch), flatten_params(net), spec, epochs)


def train_bp(net, batch, spec, epochs):
    return _network_call(TrainerKind.BP, net, batch, spec, epochs)


def train_scg(net, batch, spec, epochs):
    return _network_call(TrainerKind.SCG, net, batch, spec, epochs)


def train_qna(net, batch, spec, epochs):
    return _network_call(TrainerKind.QNA, net, batch, spec, epochs)


def train_lm(net, batch, spec, epochs):
    return _network_call(TrainerKind.LM, net, batch, spec, epochs)


def train(net: NetworkPhenotype, batch: EvaluationBatch, spec: TrainerSpec, epochs: int) -> TrainingResult:
    """Train ``net`` on ``batch`` with the trainer named by ``spec.kind``."""
    return _network_call(spec.kind, net, batch, spec, epochs)
