"""Hot numeric kernels with a switchable backend.

``FASTBOOST_KERNELS=numba`` (default when numba imports) routes the
loop-bound kernels through the JIT implementations; ``numpy`` selects the
vectorized pure-numpy fallbacks. Pointwise (1x1) convolutions are
gemm-bound and always go through BLAS, identically in both backends.

``fastboost bench`` compares the two backends kernel by kernel.
"""

from __future__ import annotations

import os

import numpy as np

_KERNEL_NAMES = (
    "conv2d_forward",
    "conv2d_bwd_input",
    "conv2d_bwd_weight",
    "depthwise_forward",
    "depthwise_bwd_input",
    "depthwise_bwd_weight",
    "maxpool_forward",
    "maxpool_backward",
)

_backend = ""


def select(name: str) -> None:
    """Bind the module-level kernel functions to the named backend."""
    global _backend
    if name == "numba":
        from . import numba_jit as impl
    elif name == "numpy":
        from . import numpy_ref as impl
    else:
        raise ValueError(f"unknown kernel backend {name!r} (expected 'numba' or 'numpy')")
    g = globals()
    for fn in _KERNEL_NAMES:
        g[fn] = getattr(impl, fn)
    _backend = name


def backend_name() -> str:
    return _backend


def _default_backend() -> str:
    env = os.environ.get("FASTBOOST_KERNELS", "").strip().lower()
    if env:
        return env
    try:
        import numba  # noqa: F401
    except ImportError:
        return "numpy"
    return "numba"


select(_default_backend())


# -- pointwise (1x1) convolution: BLAS in every backend ----------------

def pointwise_forward(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """1x1 conv: (N,C,H,W) x (Cout,C) -> (N,Cout,H,W), per-sample gemm."""
    n, c, h, wd = x.shape
    cout = w.shape[0]
    out = np.empty((n, cout, h, wd), dtype=x.dtype)
    for s in range(n):
        np.dot(w, x[s].reshape(c, h * wd), out=out[s].reshape(cout, h * wd))
    return out


def pointwise_bwd_input(gy: np.ndarray, w: np.ndarray) -> np.ndarray:
    n, cout, h, wd = gy.shape
    c = w.shape[1]
    wt = np.ascontiguousarray(w.T)
    dx = np.empty((n, c, h, wd), dtype=gy.dtype)
    for s in range(n):
        np.dot(wt, gy[s].reshape(cout, h * wd), out=dx[s].reshape(c, h * wd))
    return dx


def pointwise_bwd_weight(gy: np.ndarray, x: np.ndarray) -> np.ndarray:
    n, cout, h, wd = gy.shape
    c = x.shape[1]
    dw = np.zeros((cout, c), dtype=gy.dtype)
    hw = h * wd
    for s in range(n):
        dw += np.dot(gy[s].reshape(cout, hw), x[s].reshape(c, hw).T)
    return dw
