"""Network building blocks: conv/norm/linear layers, MBConv, attention, fusion."""

from __future__ import annotations

import math

import numpy as np

from . import ops
from .schedules import ScheduleState
from .tensor import ShapeError, Tensor

SE_REDUCTION = 2
SE_FLOOR = 4
SPATIAL_KERNEL = 7


def squash(z: float) -> float:
    """Scalar sigmoid, exact at +/- infinity."""
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


class Module:
    """Base with recursive, insertion-ordered parameter/buffer discovery."""

    def _children(self):
        for name, val in self.__dict__.items():
            if isinstance(val, Module):
                yield name, val
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        yield f"{name}.{i}", item

    def named_parameters(self, prefix: str = ""):
        for name, val in self.__dict__.items():
            if isinstance(val, Tensor) and val.requires_grad:
                yield prefix + name, val
        for cname, child in self._children():
            yield from child.named_parameters(f"{prefix}{cname}.")

    def named_buffers(self, prefix: str = ""):
        for name, val in self.__dict__.items():
            if isinstance(val, np.ndarray):
                yield prefix + name, val
        for cname, child in self._children():
            yield from child.named_buffers(f"{prefix}{cname}.")

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()


def _kaiming(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, dtype) -> Tensor:
    std = math.sqrt(2.0 / fan_in)
    return Tensor(rng.normal(0.0, std, shape).astype(dtype), requires_grad=True)


class Conv2d(Module):
    def __init__(self, c_in, c_out, kernel, stride=1, padding=0, bias=False,
                 rng=None, dtype=np.float32):
        self.stride = stride
        self.padding = padding
        self.weight = _kaiming(rng, (c_out, c_in, kernel, kernel), c_in * kernel * kernel, dtype)
        self.bias = Tensor(np.zeros(c_out, dtype=dtype), requires_grad=True) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return ops.conv2d(x, self.weight, self.bias, self.stride, self.padding)


class DepthwiseConv2d(Module):
    def __init__(self, channels, kernel=3, stride=1, padding=1, rng=None, dtype=np.float32):
        self.stride = stride
        self.padding = padding
        self.weight = _kaiming(rng, (channels, 1, kernel, kernel), kernel * kernel, dtype)

    def forward(self, x: Tensor) -> Tensor:
        return ops.depthwise_conv2d(x, self.weight, self.stride, self.padding)


class BatchNorm2d(Module):
    def __init__(self, channels, eps=1e-5, momentum=0.1, dtype=np.float32):
        self.eps = eps
        self.momentum = momentum
        self.gamma = Tensor(np.ones(channels, dtype=dtype), requires_grad=True)
        self.beta = Tensor(np.zeros(channels, dtype=dtype), requires_grad=True)
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)

    def forward(self, x: Tensor, training: bool) -> Tensor:
        return ops.batch_norm(x, self.gamma, self.beta, self.running_mean,
                              self.running_var, training, self.eps, self.momentum)


class Linear(Module):
    def __init__(self, f_in, f_out, bias=True, rng=None, dtype=np.float32):
        self.weight = _kaiming(rng, (f_out, f_in), f_in, dtype)
        self.bias = Tensor(np.zeros(f_out, dtype=dtype), requires_grad=True) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return ops.linear(x, self.weight, self.bias)


class MBConv(Module):
    """Inverted bottleneck: 1x1 expand, 3x3 depthwise, 1x1 linear projection.

    The expand stage is omitted at expansion 1; convs carry no biases since a
    BN follows each. An identity skip applies only when c_in == c_out.
    """

    def __init__(self, c_in, c_out, expansion, rng=None, dtype=np.float32):
        if expansion < 1:
            raise ValueError(f"expansion must be >= 1, got {expansion}")
        self.c_in = c_in
        self.c_out = c_out
        self.use_skip = c_in == c_out
        hidden = expansion * c_in
        if expansion > 1:
            self.expand = Conv2d(c_in, hidden, 1, rng=rng, dtype=dtype)
            self.bn_expand = BatchNorm2d(hidden, dtype=dtype)
        else:
            self.expand = None
            self.bn_expand = None
        self.dw = DepthwiseConv2d(hidden, 3, stride=1, padding=1, rng=rng, dtype=dtype)
        self.bn_dw = BatchNorm2d(hidden, dtype=dtype)
        self.project = Conv2d(hidden, c_out, 1, rng=rng, dtype=dtype)
        self.bn_project = BatchNorm2d(c_out, dtype=dtype)

    def forward(self, x: Tensor, training: bool) -> Tensor:
        if x.shape[1] != self.c_in:
            raise ShapeError(f"mbconv: expected {self.c_in} input channels, got {x.shape}")
        h = x
        if self.expand is not None:
            h = ops.silu(self.bn_expand.forward(self.expand.forward(h), training))
        h = ops.silu(self.bn_dw.forward(self.dw.forward(h), training))
        h = self.bn_project.forward(self.project.forward(h), training)
        if self.use_skip:
            h = ops.add(h, x)
        return h


class ChannelAttention(Module):
    """Squeeze-and-excitation gate: GAP, bottleneck MLP, sigmoid -> [N,C,1,1]."""

    def __init__(self, channels, reduction=SE_REDUCTION, rng=None, dtype=np.float32):
        self.channels = channels
        hidden = max(channels // reduction, SE_FLOOR)
        self.fc1 = Linear(channels, hidden, rng=rng, dtype=dtype)
        self.fc2 = Linear(hidden, channels, rng=rng, dtype=dtype)

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[1] != self.channels:
            raise ShapeError(f"channel_attention: expected {self.channels} channels, got {x.shape}")
        n, c = x.shape[0], x.shape[1]
        pooled = ops.reshape(ops.global_avg_pool(x), (n, c))
        gate = ops.sigmoid(self.fc2.forward(ops.relu(self.fc1.forward(pooled))))
        return ops.reshape(gate, (n, c, 1, 1))


class SpatialAttention(Module):
    """Location gate: channel max/mean maps, kxk conv, sigmoid -> [N,1,H,W]."""

    def __init__(self, kernel=SPATIAL_KERNEL, rng=None, dtype=np.float32):
        if kernel % 2 == 0:
            raise ValueError(f"spatial kernel must be odd, got {kernel}")
        self.conv = Conv2d(2, 1, kernel, padding=kernel // 2, bias=True, rng=rng, dtype=dtype)

    def forward(self, x: Tensor) -> Tensor:
        maps = ops.concat_channels(ops.channel_max(x), ops.channel_mean(x))
        return ops.sigmoid(self.conv.forward(maps))


class DSPA(Module):
    """Schedule-weighted fusion of channel and spatial gates with a residual.

    gate = squash(alpha_t)*A_c(x) + squash(beta_t)*A_s(x)  (broadcast add);
    out  = scale_t * (x * gate) + lambda * x.  In "normalized" mode the gate
    is divided by squash(alpha_t) + squash(beta_t).  lambda comes from the
    schedule, or from a trainable scalar in learnable mode.
    """

    def __init__(self, channels, fusion_mode="eq5", lambda_mode="scheduled",
                 reduction=SE_REDUCTION, spatial_kernel=SPATIAL_KERNEL,
                 rng=None, dtype=np.float32):
        self.channels = channels
        self.fusion_mode = fusion_mode
        self.lambda_mode = lambda_mode
        self.channel = ChannelAttention(channels, reduction, rng=rng, dtype=dtype)
        self.spatial = SpatialAttention(spatial_kernel, rng=rng, dtype=dtype)
        if lambda_mode == "learnable":
            self.lam = Tensor(np.asarray(0.5, dtype=dtype), requires_grad=True)
        else:
            self.lam = None

    def lambda_value(self, sched: ScheduleState) -> float:
        return float(self.lam.data) if self.lam is not None else sched.lambda_t

    def forward(self, x: Tensor, sched: ScheduleState) -> Tensor:
        if x.shape[1] != self.channels:
            raise ShapeError(f"dspa: expected {self.channels} channels, got {x.shape}")
        wa = squash(sched.alpha_t)
        wb = squash(sched.beta_t)
        gate = ops.add(
            ops.scalar_mul(self.channel.forward(x), wa),
            ops.scalar_mul(self.spatial.forward(x), wb),
        )
        if self.fusion_mode == "normalized":
            gate = ops.scalar_mul(gate, 1.0 / (wa + wb))
        attended = ops.scalar_mul(ops.mul(x, gate), sched.scale_t)
        if self.lam is not None:
            residual = ops.mul(x, self.lam)
        else:
            residual = ops.scalar_mul(x, sched.lambda_t)
        return ops.add(attended, residual)


class FastBoostBlock(Module):
    """MBConv chain climbing a halving channel ladder, then attention fusion.

    Channel dropout sits between consecutive MBConv layers (never after the
    last); the fusion stage wraps the chain output once per block.
    """

    def __init__(self, c_in, c_out, expansions, channel_progression,
                 channel_dropout_p=0.1, fusion_mode="eq5", lambda_mode="scheduled",
                 rng=None, dtype=np.float32):
        if len(channel_progression) != len(expansions):
            raise ValueError(
                f"{len(expansions)} expansions vs {len(channel_progression)} channel steps"
            )
        self.c_in = c_in
        self.c_out = c_out
        self.dropout_p = channel_dropout_p
        self.layers = []
        prev = c_in
        for c, e in zip(channel_progression, expansions):
            self.layers.append(MBConv(prev, c, e, rng=rng, dtype=dtype))
            prev = c
        self.dspa = DSPA(c_out, fusion_mode, lambda_mode, rng=rng, dtype=dtype)

    def forward(self, x: Tensor, sched: ScheduleState, training: bool,
                rng: np.random.Generator | None = None) -> Tensor:
        h = x
        for i, layer in enumerate(self.layers):
            if i > 0:
                h = ops.channel_dropout(h, self.dropout_p, training, rng)
            h = layer.forward(h, training)
        return self.dspa.forward(h, sched)
