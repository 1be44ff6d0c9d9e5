"""Pure-numpy reference kernels (vectorized, no JIT).

Selected with ``FASTBOOST_KERNELS=numpy``. Same contracts as
:mod:`fastboost.kernels.numba_jit`; inputs arrive pre-padded, all arrays
are C-contiguous, dtype is preserved.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import as_strided


def _im2col(xp: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    """(N, C, Hp, Wp) -> contiguous (N, C*kh*kw, Ho*Wo) patch matrix."""
    n, c, hp, wp = xp.shape
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1
    s0, s1, s2, s3 = xp.strides
    view = as_strided(xp, (n, c, kh, kw, ho, wo), (s0, s1, s2, s3, s2 * stride, s3 * stride))
    return view.reshape(n, c * kh * kw, ho * wo)


def conv2d_forward(xp: np.ndarray, w: np.ndarray, stride: int) -> np.ndarray:
    n, c, hp, wp = xp.shape
    cout, _, kh, kw = w.shape
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1
    col = _im2col(xp, kh, kw, stride)
    wm = w.reshape(cout, c * kh * kw)
    out = np.matmul(wm, col)  # (N, Cout, Ho*Wo) via broadcast
    return np.ascontiguousarray(out.reshape(n, cout, ho, wo))


def conv2d_bwd_input(gy: np.ndarray, w: np.ndarray, hp: int, wp: int, stride: int) -> np.ndarray:
    n, cout, ho, wo = gy.shape
    _, c, kh, kw = w.shape
    wm = w.reshape(cout, c * kh * kw)
    dcol = np.matmul(wm.T, gy.reshape(n, cout, ho * wo))
    dcol = dcol.reshape(n, c, kh, kw, ho, wo)
    dxp = np.zeros((n, c, hp, wp), dtype=gy.dtype)
    for i in range(kh):
        for j in range(kw):
            dxp[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += dcol[:, :, i, j]
    return dxp


def conv2d_bwd_weight(gy: np.ndarray, xp: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    n, cout, ho, wo = gy.shape
    c = xp.shape[1]
    col = _im2col(xp, kh, kw, stride)
    gym = gy.reshape(n, cout, ho * wo)
    dw = np.matmul(gym, col.transpose(0, 2, 1)).sum(axis=0)
    return np.ascontiguousarray(dw.reshape(cout, c, kh, kw))


def depthwise_forward(xp: np.ndarray, w: np.ndarray, stride: int) -> np.ndarray:
    n, c, hp, wp = xp.shape
    _, kh, kw = w.shape
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1
    out = np.zeros((n, c, ho, wo), dtype=xp.dtype)
    for i in range(kh):
        for j in range(kw):
            out += w[None, :, i, j, None, None] * xp[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride]
    return out


def depthwise_bwd_input(gy: np.ndarray, w: np.ndarray, hp: int, wp: int, stride: int) -> np.ndarray:
    n, c, ho, wo = gy.shape
    _, kh, kw = w.shape
    dxp = np.zeros((n, c, hp, wp), dtype=gy.dtype)
    for i in range(kh):
        for j in range(kw):
            dxp[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += w[None, :, i, j, None, None] * gy
    return dxp


def depthwise_bwd_weight(gy: np.ndarray, xp: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    n, c, ho, wo = gy.shape
    dw = np.zeros((c, kh, kw), dtype=gy.dtype)
    for i in range(kh):
        for j in range(kw):
            patch = xp[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride]
            dw[:, i, j] = np.einsum("nchw,nchw->c", gy, patch)
    return dw


def maxpool_forward(x: np.ndarray, k: int, stride: int) -> tuple[np.ndarray, np.ndarray]:
    """Window maxima plus the flat input index (h*W + w) of each winner.

    Ties go to the first element in row-major window order.
    """
    n, c, h, w = x.shape
    ho = (h - k) // stride + 1
    wo = (w - k) // stride + 1
    s0, s1, s2, s3 = x.strides
    view = as_strided(x, (n, c, ho, wo, k, k), (s0, s1, s2 * stride, s3 * stride, s2, s3))
    windows = view.reshape(n, c, ho, wo, k * k)
    amax = windows.argmax(axis=-1)
    out = np.take_along_axis(windows, amax[..., None], axis=-1)[..., 0]
    oh = np.arange(ho)[:, None] * stride
    ow = np.arange(wo)[None, :] * stride
    idx = (oh[None, None] + amax // k) * w + (ow[None, None] + amax % k)
    return np.ascontiguousarray(out), idx.astype(np.int64)


def maxpool_backward(gy: np.ndarray, idx: np.ndarray, h: int, w: int) -> np.ndarray:
    n, c = gy.shape[:2]
    dx = np.zeros((n * c, h * w), dtype=gy.dtype)
    rows = np.repeat(np.arange(n * c), idx[0, 0].size)
    np.add.at(dx, (rows, idx.reshape(-1)), gy.reshape(-1))
    return dx.reshape(n, c, h, w)
