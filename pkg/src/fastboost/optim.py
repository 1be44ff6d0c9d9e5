"""AdamW optimizer with decoupled weight decay."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


class AdamW:
    """Adam moments plus weight decay applied directly to the parameter.

    Parameters with ndim <= 1 (norm scales/shifts, biases, scalars) are
    excluded from decay. With weight_decay=0 this is exactly Adam.
    """

    def __init__(self, named_params: list[tuple[str, Tensor]], lr: float = 0.001,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8,
                 weight_decay: float = 0.01):
        if lr <= 0:
            raise ValueError(f"lr must be positive, got {lr}")
        if not (0.0 <= betas[0] < 1.0 and 0.0 <= betas[1] < 1.0):
            raise ValueError(f"betas must lie in [0, 1), got {betas}")
        if eps <= 0:
            raise ValueError(f"eps must be positive, got {eps}")
        if weight_decay < 0:
            raise ValueError(f"weight_decay must be >= 0, got {weight_decay}")
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self.names = [name for name, _ in named_params]
        self.params = [p for _, p in named_params]
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self.decayed = [p.ndim >= 2 for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self):
        self.step_count += 1
        bc1 = 1.0 - self.beta1 ** self.step_count
        bc2 = 1.0 - self.beta2 ** self.step_count
        for p, m, v, decayed in zip(self.params, self.m, self.v, self.decayed):
            g = p.grad
            if g is None:
                continue
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            if decayed and self.weight_decay:
                update = update + self.weight_decay * p.data
            p.data -= (self.lr * update).astype(p.dtype, copy=False)

    def state_dict(self) -> dict:
        return {
            "step_count": self.step_count,
            "m": {name: m for name, m in zip(self.names, self.m)},
            "v": {name: v for name, v in zip(self.names, self.v)},
        }

    def load_state_dict(self, state: dict):
        self.step_count = int(state["step_count"])
        for name, m, v in zip(self.names, self.m, self.v):
            m[...] = state["m"][name]
            v[...] = state["v"][name]
