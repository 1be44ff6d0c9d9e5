"""Numba-compiled kernels for the loop-bound hot paths.

Default backend. Patch gathering, depthwise convolution and pooling are
explicit loops under @njit; the gemm-shaped contractions go through
np.dot, which numba lowers to BLAS. Reduction order inside every output
cell is fixed, so results are bitwise reproducible run to run.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _im2col(xp, kh, kw, stride):
    n, c, hp, wp = xp.shape
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1
    col = np.empty((n, c * kh * kw, ho * wo), dtype=xp.dtype)
    for s in range(n):
        row = 0
        for ch in range(c):
            for i in range(kh):
                for j in range(kw):
                    p = 0
                    for oh in range(ho):
                        base = oh * stride + i
                        for ow in range(wo):
                            col[s, row, p] = xp[s, ch, base, ow * stride + j]
                            p += 1
                    row += 1
    return col


@njit(cache=True)
def conv2d_forward(xp, w, stride):
    n, c, hp, wp = xp.shape
    cout = w.shape[0]
    kh, kw = w.shape[2], w.shape[3]
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1
    col = _im2col(xp, kh, kw, stride)
    wm = np.ascontiguousarray(w.reshape(cout, c * kh * kw))
    out = np.empty((n, cout, ho, wo), dtype=xp.dtype)
    for s in range(n):
        out[s] = np.dot(wm, col[s]).reshape(cout, ho, wo)
    return out


@njit(cache=True)
def conv2d_bwd_input(gy, w, hp, wp, stride):
    n, cout, ho, wo = gy.shape
    c = w.shape[1]
    kh, kw = w.shape[2], w.shape[3]
    wmt = np.ascontiguousarray(w.reshape(cout, c * kh * kw).T)
    dxp = np.zeros((n, c, hp, wp), dtype=gy.dtype)
    for s in range(n):
        dcol = np.dot(wmt, gy[s].reshape(cout, ho * wo))
        row = 0
        for ch in range(c):
            for i in range(kh):
                for j in range(kw):
                    p = 0
                    for oh in range(ho):
                        base = oh * stride + i
                        for ow in range(wo):
                            dxp[s, ch, base, ow * stride + j] += dcol[row, p]
                            p += 1
                    row += 1
    return dxp


@njit(cache=True)
def conv2d_bwd_weight(gy, xp, kh, kw, stride):
    n, cout, ho, wo = gy.shape
    c = xp.shape[1]
    col = _im2col(xp, kh, kw, stride)
    dwm = np.zeros((cout, c * kh * kw), dtype=gy.dtype)
    for s in range(n):
        dwm += np.dot(gy[s].reshape(cout, ho * wo), col[s].T)
    return dwm.reshape(cout, c, kh, kw).copy()


@njit(cache=True)
def depthwise_forward(xp, w, stride):
    n, c, hp, wp = xp.shape
    kh, kw = w.shape[1], w.shape[2]
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1
    out = np.zeros((n, c, ho, wo), dtype=xp.dtype)
    for s in range(n):
        for ch in range(c):
            for i in range(kh):
                for j in range(kw):
                    wv = w[ch, i, j]
                    for oh in range(ho):
                        base = oh * stride + i
                        for ow in range(wo):
                            out[s, ch, oh, ow] += wv * xp[s, ch, base, ow * stride + j]
    return out


@njit(cache=True)
def depthwise_bwd_input(gy, w, hp, wp, stride):
    n, c, ho, wo = gy.shape
    kh, kw = w.shape[1], w.shape[2]
    dxp = np.zeros((n, c, hp, wp), dtype=gy.dtype)
    for s in range(n):
        for ch in range(c):
            for i in range(kh):
                for j in range(kw):
                    wv = w[ch, i, j]
                    for oh in range(ho):
                        base = oh * stride + i
                        for ow in range(wo):
                            dxp[s, ch, base, ow * stride + j] += wv * gy[s, ch, oh, ow]
    return dxp


@njit(cache=True)
def depthwise_bwd_weight(gy, xp, kh, kw, stride):
    n, c, ho, wo = gy.shape
    dw = np.zeros((c, kh, kw), dtype=gy.dtype)
    for s in range(n):
        for ch in range(c):
            for i in range(kh):
                for j in range(kw):
                    acc = dw[ch, i, j]
                    for oh in range(ho):
                        base = oh * stride + i
                        for ow in range(wo):
                            acc += gy[s, ch, oh, ow] * xp[s, ch, base, ow * stride + j]
                    dw[ch, i, j] = acc
    return dw


@njit(cache=True)
def maxpool_forward(x, k, stride):
    n, c, h, w = x.shape
    ho = (h - k) // stride + 1
    wo = (w - k) // stride + 1
    out = np.empty((n, c, ho, wo), dtype=x.dtype)
    idx = np.empty((n, c, ho, wo), dtype=np.int64)
    for s in range(n):
        for ch in range(c):
            for oh in range(ho):
                for ow in range(wo):
                    h0 = oh * stride
                    w0 = ow * stride
                    best = x[s, ch, h0, w0]
                    bi = h0 * w + w0
                    for i in range(k):
                        for j in range(k):
                            v = x[s, ch, h0 + i, w0 + j]
                            if v > best:  # strict: first occurrence wins ties
                                best = v
                                bi = (h0 + i) * w + (w0 + j)
                    out[s, ch, oh, ow] = best
                    idx[s, ch, oh, ow] = bi
    return out, idx


@njit(cache=True)
def maxpool_backward(gy, idx, h, w):
    n, c, ho, wo = gy.shape
    dx = np.zeros((n, c, h * w), dtype=gy.dtype)
    for s in range(n):
        for ch in range(c):
            for oh in range(ho):
                for ow in range(wo):
                    dx[s, ch, idx[s, ch, oh, ow]] += gy[s, ch, oh, ow]
    return dx.reshape(n, c, h, w)
