"""Full network assembly: stem, staged blocks with pooling, classifier head."""

from __future__ import annotations

import numpy as np

from . import ops
from .blocks import BatchNorm2d, Conv2d, FastBoostBlock, Linear, Module
from .config import ArchConfig, block_channel_progression, validate_config
from .schedules import ScheduleState
from .tensor import ShapeError, Tensor


class Network(Module):
    """Stem conv, three attention blocks with inter-stage pooling, MLP head.

    Spatial size halves after each of the first two blocks; global average
    pooling collapses whatever remains, so any input size divisible by 4
    (and >= 8) works.
    """

    def __init__(self, cfg: ArchConfig, rng: np.random.Generator, dtype=np.float32):
        validate_config(cfg)
        self.cfg = cfg
        self.stem_conv = Conv2d(3, cfg.stem_out, 3, padding=1, rng=rng, dtype=dtype)
        self.stem_bn = BatchNorm2d(cfg.stem_out, dtype=dtype)
        self.blocks = []
        prev = cfg.stem_out
        for c_out, exps in zip(cfg.stage_channels, cfg.expansions):
            progression = block_channel_progression(c_out, cfg.layers_per_block)
            self.blocks.append(
                FastBoostBlock(
                    prev, c_out, exps, progression,
                    channel_dropout_p=cfg.channel_dropout_p,
                    fusion_mode=cfg.fusion_mode,
                    lambda_mode=cfg.lambda_mode,
                    rng=rng, dtype=dtype,
                )
            )
            prev = c_out
        self.fc1 = Linear(prev, cfg.classifier_hidden, rng=rng, dtype=dtype)
        self.fc2 = Linear(cfg.classifier_hidden, cfg.num_classes, rng=rng, dtype=dtype)

    def forward(self, x: Tensor, sched: ScheduleState, training: bool = False,
                rng: np.random.Generator | None = None) -> Tensor:
        if x.ndim != 4 or x.shape[1] != 3:
            raise ShapeError(f"network: expected (N,3,H,W) input, got {x.shape}")
        h = ops.silu(self.stem_bn.forward(self.stem_conv.forward(x), training))
        last = len(self.blocks) - 1
        for i, block in enumerate(self.blocks):
            h = block.forward(h, sched, training, rng)
            if i < last:
                h = ops.max_pool2d(h, 2, 2)
        h = ops.reshape(ops.global_avg_pool(h), (h.shape[0], h.shape[1]))
        h = ops.silu(self.fc1.forward(h))
        h = ops.dropout(h, self.cfg.classifier_dropout, training, rng)
        return self.fc2.forward(h)

    def lambda_value(self, sched: ScheduleState) -> float:
        """Effective residual weight: schedule value, or mean of learnable scalars."""
        if self.cfg.lambda_mode != "learnable":
            return sched.lambda_t
        vals = [b.dspa.lambda_value(sched) for b in self.blocks]
        return sum(vals) / len(vals)

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())


def build_network(cfg: ArchConfig, rng: np.random.Generator | int | None = None,
                  dtype=np.float32) -> Network:
    """Construct a network with seeded Kaiming initialization."""
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    return Network(cfg, rng, dtype=dtype)
