"""Differentiable primitive operations.

Every function takes Tensors (plus plain configuration scalars), computes
the forward result with numpy / the selected kernel backend, and records
a closure that routes gradients back to its inputs. Broadcasting follows
numpy rules; gradients through broadcast axes are sum-reduced back to the
operand shape.
"""

from __future__ import annotations

import numpy as np

from . import kernels as K
from .tensor import (
    DegenerateBatchError,
    GeometryError,
    ShapeError,
    Tensor,
    make_tensor,
)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum-reduce a broadcast gradient back down to ``shape``."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _stable_sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


# -- elementwise -------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    try:
        data = a.data + b.data
    except ValueError as exc:
        raise ShapeError(f"add: incompatible shapes {a.shape} and {b.shape}") from exc

    def backward():
        gy = out.grad
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(gy, a.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(gy, b.shape))

    out = make_tensor(data, (a, b), "add", backward)
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    try:
        data = a.data * b.data
    except ValueError as exc:
        raise ShapeError(f"mul: incompatible shapes {a.shape} and {b.shape}") from exc

    def backward():
        gy = out.grad
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(gy * b.data, a.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(gy * a.data, b.shape))

    out = make_tensor(data, (a, b), "mul", backward)
    return out


def scalar_mul(x: Tensor, s: float) -> Tensor:
    s = float(s)
    data = x.data * s

    def backward():
        if x.requires_grad:
            x.accumulate_grad(out.grad * s)

    out = make_tensor(data, (x,), "scalar_mul", backward)
    return out


def sum_all(x: Tensor) -> Tensor:
    data = x.data.sum()

    def backward():
        if x.requires_grad:
            x.accumulate_grad(np.full(x.shape, out.grad, dtype=x.dtype))

    out = make_tensor(np.asarray(data), (x,), "sum", backward)
    return out


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    data = x.data.reshape(shape)

    def backward():
        if x.requires_grad:
            x.accumulate_grad(out.grad.reshape(x.shape))

    out = make_tensor(data, (x,), "reshape", backward)
    return out


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 4 or b.ndim != 4 or a.shape[0] != b.shape[0] or a.shape[2:] != b.shape[2:]:
        raise ShapeError(f"concat_channels: incompatible shapes {a.shape} and {b.shape}")
    data = np.concatenate([a.data, b.data], axis=1)
    ca = a.shape[1]

    def backward():
        gy = out.grad
        if a.requires_grad:
            a.accumulate_grad(gy[:, :ca])
        if b.requires_grad:
            b.accumulate_grad(gy[:, ca:])

    out = make_tensor(data, (a, b), "concat_channels", backward)
    return out


# -- activations -------------------------------------------------------

def sigmoid(x: Tensor) -> Tensor:
    s = _stable_sigmoid(x.data)

    def backward():
        if x.requires_grad:
            x.accumulate_grad(out.grad * s * (1.0 - s))

    out = make_tensor(s, (x,), "sigmoid", backward)
    return out


def silu(x: Tensor) -> Tensor:
    s = _stable_sigmoid(x.data)
    data = x.data * s

    def backward():
        if x.requires_grad:
            x.accumulate_grad(out.grad * s * (1.0 + x.data * (1.0 - s)))

    out = make_tensor(data, (x,), "silu", backward)
    return out


def relu(x: Tensor) -> Tensor:
    data = np.maximum(x.data, 0)

    def backward():
        if x.requires_grad:
            x.accumulate_grad(out.grad * (x.data > 0))

    out = make_tensor(data, (x,), "relu", backward)
    return out


# -- convolutions ------------------------------------------------------

def conv2d(
    x: Tensor,
    w: Tensor,
    bias: Tensor | None = None,
    stride: int = 1,
    padding: int = 0,
) -> Tensor:
    """Cross-correlation of (N,Cin,H,W) with (Cout,Cin,kh,kw) filters."""
    if x.ndim != 4 or w.ndim != 4:
        raise ShapeError(f"conv2d: expected 4-d input and weight, got {x.shape} and {w.shape}")
    n, cin, h, wdt = x.shape
    cout, cw, kh, kw = w.shape
    if cw != cin:
        raise ShapeError(f"conv2d: input channels {x.shape} do not match weight {w.shape}")
    if bias is not None and bias.shape != (cout,):
        raise ShapeError(f"conv2d: bias shape {bias.shape} does not match {cout} output channels")
    ho_span = h + 2 * padding - kh
    wo_span = wdt + 2 * padding - kw
    if ho_span < 0 or wo_span < 0 or ho_span % stride or wo_span % stride:
        raise GeometryError(
            f"conv2d: kernel {kh}x{kw} stride {stride} padding {padding} "
            f"does not tile input {h}x{wdt}"
        )

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x.data
    pointwise = kh == 1 and kw == 1 and stride == 1
    if pointwise:
        wflat = w.data.reshape(cout, cin)
        y = K.pointwise_forward(xp, wflat)
    else:
        y = K.conv2d_forward(xp, w.data, stride)
    if bias is not None:
        y += bias.data[None, :, None, None]

    hp, wp = xp.shape[2], xp.shape[3]

    def backward():
        gy = out.grad
        if bias is not None and bias.requires_grad:
            bias.accumulate_grad(gy.sum(axis=(0, 2, 3)))
        if w.requires_grad:
            if pointwise:
                gw = K.pointwise_bwd_weight(gy, xp).reshape(w.shape)
            else:
                gw = K.conv2d_bwd_weight(gy, xp, kh, kw, stride)
            w.accumulate_grad(gw)
        if x.requires_grad:
            if pointwise:
                gxp = K.pointwise_bwd_input(gy, w.data.reshape(cout, cin))
            else:
                gxp = K.conv2d_bwd_input(gy, w.data, hp, wp, stride)
            if padding:
                gxp = np.ascontiguousarray(gxp[:, :, padding : padding + h, padding : padding + wdt])
            x.accumulate_grad(gxp)

    parents = (x, w) if bias is None else (x, w, bias)
    out = make_tensor(y, parents, "conv2d", backward)
    return out


def depthwise_conv2d(x: Tensor, w: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """Per-channel spatial convolution, weight (C,1,kh,kw), no channel mixing."""
    if x.ndim != 4 or w.ndim != 4 or w.shape[1] != 1:
        raise ShapeError(f"depthwise_conv2d: expected (C,1,kh,kw) weight, got {w.shape}")
    n, c, h, wdt = x.shape
    if w.shape[0] != c:
        raise ShapeError(f"depthwise_conv2d: input channels {x.shape} do not match weight {w.shape}")
    kh, kw = w.shape[2], w.shape[3]
    ho_span = h + 2 * padding - kh
    wo_span = wdt + 2 * padding - kw
    if ho_span < 0 or wo_span < 0 or ho_span % stride or wo_span % stride:
        raise GeometryError(
            f"depthwise_conv2d: kernel {kh}x{kw} stride {stride} padding {padding} "
            f"does not tile input {h}x{wdt}"
        )

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x.data
    wk = np.ascontiguousarray(w.data[:, 0])
    y = K.depthwise_forward(xp, wk, stride)
    hp, wp = xp.shape[2], xp.shape[3]

    def backward():
        gy = out.grad
        if w.requires_grad:
            gw = K.depthwise_bwd_weight(gy, xp, kh, kw, stride)
            w.accumulate_grad(gw.reshape(w.shape))
        if x.requires_grad:
            gxp = K.depthwise_bwd_input(gy, wk, hp, wp, stride)
            if padding:
                gxp = np.ascontiguousarray(gxp[:, :, padding : padding + h, padding : padding + wdt])
            x.accumulate_grad(gxp)

    out = make_tensor(y, (x, w), "depthwise_conv2d", backward)
    return out


# -- normalization -----------------------------------------------------

def batch_norm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    eps: float = 1e-5,
    momentum: float = 0.1,
) -> Tensor:
    """Per-channel normalization; biased variance, running stats in train mode."""
    if eps <= 0:
        raise ValueError(f"batch_norm: eps must be positive, got {eps}")
    n, c, h, wdt = x.shape
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ShapeError(f"batch_norm: gamma/beta {gamma.shape}/{beta.shape} do not match {c} channels")
    xd = x.data
    if training:
        if n * h * wdt == 1:
            raise DegenerateBatchError("batch_norm: a single value per channel has undefined variance")
        mean = xd.mean(axis=(0, 2, 3))
        var = xd.var(axis=(0, 2, 3))
        running_mean *= 1.0 - momentum
        running_mean += momentum * mean
        running_var *= 1.0 - momentum
        running_var += momentum * var
    else:
        mean = running_mean.astype(xd.dtype, copy=False)
        var = running_var.astype(xd.dtype, copy=False)
    inv = 1.0 / np.sqrt(var + np.asarray(eps, dtype=xd.dtype))
    xhat = (xd - mean[None, :, None, None]) * inv[None, :, None, None]
    y = gamma.data[None, :, None, None] * xhat + beta.data[None, :, None, None]

    def backward():
        gy = out.grad
        if beta.requires_grad:
            beta.accumulate_grad(gy.sum(axis=(0, 2, 3)))
        if gamma.requires_grad:
            gamma.accumulate_grad((gy * xhat).sum(axis=(0, 2, 3)))
        if x.requires_grad:
            ghat = gy * gamma.data[None, :, None, None]
            if training:
                mean_g = ghat.mean(axis=(0, 2, 3), keepdims=True)
                mean_gx = (ghat * xhat).mean(axis=(0, 2, 3), keepdims=True)
                gx = inv[None, :, None, None] * (ghat - mean_g - xhat * mean_gx)
            else:
                gx = ghat * inv[None, :, None, None]
            x.accumulate_grad(gx)

    out = make_tensor(y, (x, gamma, beta), "batch_norm", backward)
    return out


# -- pooling -----------------------------------------------------------

def global_avg_pool(x: Tensor) -> Tensor:
    if x.ndim != 4:
        raise ShapeError(f"global_avg_pool: expected 4-d input, got {x.shape}")
    data = x.data.mean(axis=(2, 3), keepdims=True)
    inv_area = 1.0 / (x.shape[2] * x.shape[3])

    def backward():
        if x.requires_grad:
            x.accumulate_grad(np.broadcast_to(out.grad * inv_area, x.shape).copy())

    out = make_tensor(data, (x,), "global_avg_pool", backward)
    return out


def max_pool2d(x: Tensor, k: int, stride: int) -> Tensor:
    if x.ndim != 4:
        raise ShapeError(f"max_pool2d: expected 4-d input, got {x.shape}")
    n, c, h, wdt = x.shape
    if k < 1 or stride < 1 or k > h or k > wdt:
        raise GeometryError(f"max_pool2d: window {k} stride {stride} does not fit input {h}x{wdt}")
    y, idx = K.maxpool_forward(x.data, k, stride)

    def backward():
        if x.requires_grad:
            x.accumulate_grad(K.maxpool_backward(out.grad, idx, h, wdt))

    out = make_tensor(y, (x,), "max_pool2d", backward)
    return out


def channel_max(x: Tensor) -> Tensor:
    """Per-location max over channels -> (N,1,H,W); ties route to the first channel."""
    amax = x.data.argmax(axis=1)[:, None]
    data = np.take_along_axis(x.data, amax, axis=1)

    def backward():
        if x.requires_grad:
            gx = np.zeros_like(x.data)
            np.put_along_axis(gx, amax, out.grad, axis=1)
            x.accumulate_grad(gx)

    out = make_tensor(data, (x,), "channel_max", backward)
    return out


def channel_mean(x: Tensor) -> Tensor:
    """Per-location mean over channels -> (N,1,H,W)."""
    data = x.data.mean(axis=1, keepdims=True)
    inv_c = 1.0 / x.shape[1]

    def backward():
        if x.requires_grad:
            x.accumulate_grad(np.broadcast_to(out.grad * inv_c, x.shape).copy())

    out = make_tensor(data, (x,), "channel_mean", backward)
    return out


# -- dense -------------------------------------------------------------

def linear(x: Tensor, w: Tensor, bias: Tensor | None = None) -> Tensor:
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[1]:
        raise ShapeError(f"linear: input {x.shape} does not match weight {w.shape}")
    y = x.data @ w.data.T
    if bias is not None:
        if bias.shape != (w.shape[0],):
            raise ShapeError(f"linear: bias {bias.shape} does not match weight {w.shape}")
        y += bias.data

    def backward():
        gy = out.grad
        if bias is not None and bias.requires_grad:
            bias.accumulate_grad(gy.sum(axis=0))
        if w.requires_grad:
            w.accumulate_grad(gy.T @ x.data)
        if x.requires_grad:
            x.accumulate_grad(gy @ w.data)

    parents = (x, w) if bias is None else (x, w, bias)
    out = make_tensor(y, parents, "linear", backward)
    return out


# -- regularization ----------------------------------------------------

def dropout(x: Tensor, p: float, training: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout: survivors scaled by 1/(1-p); eval mode is the identity."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout: p must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    if rng is None:
        raise ValueError("dropout: training mode needs an rng")
    keep = (rng.random(x.shape) >= p).astype(x.dtype)
    keep *= np.asarray(1.0 / (1.0 - p), dtype=x.dtype)
    data = x.data * keep

    def backward():
        if x.requires_grad:
            x.accumulate_grad(out.grad * keep)

    out = make_tensor(data, (x,), "dropout", backward)
    return out


def channel_dropout(x: Tensor, p: float, training: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Dropout of whole (n, c) feature-map channels, inverted scaling."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"channel_dropout: p must be in [0, 1), got {p}")
    if x.ndim != 4:
        raise ShapeError(f"channel_dropout: expected 4-d input, got {x.shape}")
    if not training or p == 0.0:
        return x
    if rng is None:
        raise ValueError("channel_dropout: training mode needs an rng")
    keep = (rng.random(x.shape[:2]) >= p).astype(x.dtype)
    keep *= np.asarray(1.0 / (1.0 - p), dtype=x.dtype)
    keep = keep[:, :, None, None]
    data = x.data * keep

    def backward():
        if x.requires_grad:
            x.accumulate_grad(out.grad * keep)

    out = make_tensor(data, (x,), "channel_dropout", backward)
    return out


# -- loss --------------------------------------------------------------

def softmax_cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean negative log-softmax of the true class; max-subtracted for stability."""
    if logits.ndim != 2:
        raise ShapeError(f"softmax_cross_entropy: expected (N, K) logits, got {logits.shape}")
    n, k = logits.shape
    labels = np.asarray(labels)
    if labels.shape != (n,):
        raise ShapeError(f"softmax_cross_entropy: labels shape {labels.shape} does not match batch {n}")
    bad = (labels < 0) | (labels >= k)
    if bad.any():
        i = int(np.argmax(bad))
        raise ValueError(f"softmax_cross_entropy: label {labels[i]} at index {i} outside [0, {k})")
    z = logits.data
    zmax = z.max(axis=1, keepdims=True)
    shifted = z - zmax
    log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - log_norm
    loss = -logp[np.arange(n), labels].mean()

    def backward():
        if logits.requires_grad:
            g = np.exp(logp)
            g[np.arange(n), labels] -= 1.0
            g *= out.grad / n
            logits.accumulate_grad(g.astype(z.dtype, copy=False))

    out = make_tensor(np.asarray(loss, dtype=z.dtype), (logits,), "softmax_cross_entropy", backward)
    return out
