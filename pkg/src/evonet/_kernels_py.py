"""Vectorised numpy kernels; the fallback when the compiled extension is absent.

All functions take the canonical flat parameter vector, the per-neuron
activation codes (see :class:`evonet.activations.ActivationKind`), a C-ordered
``(P, d)`` input matrix and, where needed, the target vector. Parameters are
laid out per hidden neuron (input weights, then bias), then the output
weights, then the output bias.
"""
import numpy as np

from .activations import TANH_DGAIN, TANH_GAIN, TANH_OFFSET, TANH_SLOPE


# overflow is detected by the callers' finiteness checks, not reported here
_quiet = np.errstate(over="ignore", invalid="ignore")


def _hidden(params, codes, X, with_derivative):
    h = codes.shape[0]
    d = X.shape[1]
    n_hidden = h * (d + 1)
    block = params[:n_hidden].reshape(h, d + 1)
    v = params[n_hidden:n_hidden + h]
    T = np.tanh((X @ block[:, :d].T + block[:, d]) * TANH_SLOPE[codes])
    A = TANH_OFFSET[codes] + TANH_GAIN[codes] * T
    D = TANH_DGAIN[codes] * (1.0 - T * T) if with_derivative else None
    return A, D, v, params[n_hidden + h]


@_quiet
def predict(params, codes, X):
    A, _, v, c = _hidden(params, codes, X, False)
    return A @ v + c


@_quiet
def sse(params, codes, X, t):
    e = predict(params, codes, X) - t
    return float(e @ e)


@_quiet
def sse_grad(params, codes, X, t):
    A, D, v, c = _hidden(params, codes, X, True)
    e = A @ v + c - t
    delta = D * (e[:, None] * v)
    h = codes.shape[0]
    d = X.shape[1]
    grad = np.empty(params.shape[0])
    hidden = grad[:h * (d + 1)].reshape(h, d + 1)
    hidden[:, :d] = delta.T @ X
    hidden[:, d] = delta.sum(axis=0)
    grad[h * (d + 1):h * (d + 1) + h] = A.T @ e
    grad[-1] = e.sum()
    return float(e @ e), grad


@_quiet
def residuals_jacobian(params, codes, X, t):
    A, D, v, c = _hidden(params, codes, X, True)
    e = A @ v + c - t
    P, d = X.shape
    h = codes.shape[0]
    J = np.empty((P, params.shape[0]))
    hidden = J[:, :h * (d + 1)].reshape(P, h, d + 1)
    dz = D * v
    hidden[:, :, :d] = dz[:, :, None] * X[:, None, :]
    hidden[:, :, d] = dz
    J[:, h * (d + 1):h * (d + 1) + h] = A
    J[:, -1] = 1.0
    return e, J
