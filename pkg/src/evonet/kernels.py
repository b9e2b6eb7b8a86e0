"""Backend selection for the network kernels.

The compiled extension ``evonet._kernels`` is used when it imports; otherwise
the numpy implementation in :mod:`evonet._kernels_py` is. Setting
``EVONET_PURE_PYTHON=1`` forces the fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if not os.environ.get("EVONET_PURE_PYTHON"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        _impl = _kernels_py

predict = _impl.predict
sse = _impl.sse
sse_grad = _impl.sse_grad
residuals_jacobian = _impl.residuals_jacobian


def backend(name: str):
    """Return the kernel module for ``name`` (``"compiled"`` or ``"python"``)."""
    if name == "python":
        return _kernels_py
    if name == "compiled":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown kernel backend {name!r}")


def use_backend(name: str) -> str:
    """Switch the active backend in-process; returns the previous one's name."""
    global BACKEND, predict, sse, sse_grad, residuals_jacobian
    impl = backend(name)
    previous = BACKEND
    predict, sse, sse_grad, residuals_jacobian = impl.predict, impl.sse, impl.sse_grad, impl.residuals_jacobian
    BACKEND = name
    return previous
