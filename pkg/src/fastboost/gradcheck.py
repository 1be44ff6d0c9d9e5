"""Finite-difference gradient verification for ops, blocks, and the network.

Everything runs in 64-bit. Inputs are nudged away from kink points (relu
zero crossings, pooling ties) so central differences are valid. The
miniature network check covers every parameter tensor, per-coordinate
under --full, otherwise via sampled coordinates plus random-direction
directional derivatives over the whole parameter vector.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import ops
from .blocks import DSPA, MBConv, SpatialAttention
from .config import ArchConfig
from .network import build_network
from .schedules import schedule_state
from .tensor import Tensor

TOL = 1e-4
EPS = 1e-6


@dataclass
class CheckResult:
    name: str
    rel: float
    ok: bool
    seconds: float


def fd_gradient(f, arr: np.ndarray, eps: float = EPS) -> np.ndarray:
    """Central-difference gradient of scalar f with respect to arr, in place."""
    grad = np.zeros_like(arr)
    flat = arr.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        fp = f()
        flat[i] = old - eps
        fm = f()
        flat[i] = old
        gflat[i] = (fp - fm) / (2.0 * eps)
    return grad


def rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = max(np.abs(analytic).max(initial=0.0),
                np.abs(numeric).max(initial=0.0), 1e-8)
    return float(np.abs(analytic - numeric).max(initial=0.0) / denom)


def _away_from_zero(arr: np.ndarray, margin: float = 0.05) -> np.ndarray:
    """Shift entries with |x| < margin outward so relu kinks are not crossed."""
    return arr + np.sign(arr) * margin


def _check(name: str, make_out, wrt: list[tuple[str, Tensor]],
           results: list[CheckResult], rng: np.random.Generator,
           tol: float = TOL, eps: float = EPS) -> None:
    t0 = time.perf_counter()
    out = make_out()
    weights = rng.standard_normal(out.shape)
    for _, t in wrt:
        t.zero_grad()
    ops.sum_all(ops.mul(out, Tensor(weights))).backward()

    def scalar():
        return float((make_out().data * weights).sum())

    for label, t in wrt:
        numeric = fd_gradient(scalar, t.data, eps)
        rel = rel_error(t.grad, numeric)
        results.append(CheckResult(f"{name}/{label}", rel, rel < tol,
                                   time.perf_counter() - t0))
        t0 = time.perf_counter()


def op_checks() -> list[CheckResult]:
    rng = np.random.default_rng(1234)
    results: list[CheckResult] = []

    x = Tensor(rng.standard_normal((2, 3, 7, 7)), requires_grad=True)
    w = Tensor(rng.standard_normal((4, 3, 3, 3)), requires_grad=True)
    b = Tensor(rng.standard_normal(4), requires_grad=True)
    _check("conv2d_s2p1", lambda: ops.conv2d(x, w, b, stride=2, padding=1),
           [("x", x), ("w", w), ("b", b)], results, rng)

    x = Tensor(rng.standard_normal((2, 5, 4, 4)), requires_grad=True)
    w = Tensor(rng.standard_normal((3, 5, 1, 1)), requires_grad=True)
    _check("conv1x1", lambda: ops.conv2d(x, w),
           [("x", x), ("w", w)], results, rng)

    x = Tensor(rng.standard_normal((2, 4, 6, 6)), requires_grad=True)
    w = Tensor(rng.standard_normal((4, 1, 3, 3)), requires_grad=True)
    _check("depthwise", lambda: ops.depthwise_conv2d(x, w, 1, 1),
           [("x", x), ("w", w)], results, rng)

    x = Tensor(rng.standard_normal((3, 4, 5, 5)), requires_grad=True)
    g = Tensor(rng.standard_normal(4), requires_grad=True)
    bt = Tensor(rng.standard_normal(4), requires_grad=True)

    def bn_train():
        return ops.batch_norm(x, g, bt, np.zeros(4), np.ones(4), training=True)

    _check("batch_norm_train", bn_train, [("x", x), ("gamma", g), ("beta", bt)],
           results, rng)
    rm = rng.standard_normal(4)
    rv = rng.random(4) + 0.5
    _check("batch_norm_eval",
           lambda: ops.batch_norm(x, g, bt, rm, rv, training=False),
           [("x", x), ("gamma", g), ("beta", bt)], results, rng)

    x = Tensor(rng.standard_normal((2, 3, 6, 6)), requires_grad=True)
    _check("max_pool2d", lambda: ops.max_pool2d(x, 2, 2), [("x", x)], results, rng)

    x = Tensor(rng.standard_normal((2, 3, 4, 4)), requires_grad=True)
    _check("global_avg_pool", lambda: ops.global_avg_pool(x), [("x", x)], results, rng)

    x = Tensor(rng.standard_normal((3, 9)), requires_grad=True)
    _check("silu", lambda: ops.silu(x), [("x", x)], results, rng)
    _check("sigmoid", lambda: ops.sigmoid(x), [("x", x)], results, rng)
    xr = Tensor(_away_from_zero(rng.standard_normal((3, 9))), requires_grad=True)
    _check("relu", lambda: ops.relu(xr), [("x", xr)], results, rng)

    x = Tensor(rng.standard_normal((4, 6)), requires_grad=True)
    w = Tensor(rng.standard_normal((3, 6)), requires_grad=True)
    b = Tensor(rng.standard_normal(3), requires_grad=True)
    _check("linear", lambda: ops.linear(x, w, b),
           [("x", x), ("w", w), ("b", b)], results, rng)

    x = Tensor(rng.standard_normal((2, 5, 3, 3)), requires_grad=True)
    _check("channel_max", lambda: ops.channel_max(x), [("x", x)], results, rng)
    _check("channel_mean", lambda: ops.channel_mean(x), [("x", x)], results, rng)

    a = Tensor(rng.standard_normal((2, 3, 1, 1)), requires_grad=True)
    b4 = Tensor(rng.standard_normal((2, 1, 4, 4)), requires_grad=True)
    _check("broadcast_add", lambda: ops.add(a, b4), [("a", a), ("b", b4)], results, rng)
    _check("broadcast_mul", lambda: ops.mul(a, b4), [("a", a), ("b", b4)], results, rng)

    x = Tensor(rng.standard_normal((2, 2, 3, 3)), requires_grad=True)
    y = Tensor(rng.standard_normal((2, 3, 3, 3)), requires_grad=True)
    _check("concat_channels", lambda: ops.concat_channels(x, y),
           [("a", x), ("b", y)], results, rng)

    x = Tensor(rng.standard_normal((4, 8)), requires_grad=True)
    _check("dropout", lambda: ops.dropout(x, 0.4, True, np.random.default_rng(5)),
           [("x", x)], results, rng)
    x = Tensor(rng.standard_normal((2, 6, 3, 3)), requires_grad=True)
    _check("channel_dropout",
           lambda: ops.channel_dropout(x, 0.3, True, np.random.default_rng(6)),
           [("x", x)], results, rng)

    logits = Tensor(rng.standard_normal((5, 4)), requires_grad=True)
    labels = np.array([0, 1, 2, 3, 1])
    t0 = time.perf_counter()
    logits.zero_grad()
    ops.softmax_cross_entropy(logits, labels).backward()
    numeric = fd_gradient(
        lambda: float(ops.softmax_cross_entropy(Tensor(logits.data), labels).data),
        logits.data)
    rel = rel_error(logits.grad, numeric)
    results.append(CheckResult("softmax_cross_entropy/logits", rel, rel < TOL,
                               time.perf_counter() - t0))
    return results


def block_checks() -> list[CheckResult]:
    rng = np.random.default_rng(99)
    results: list[CheckResult] = []
    sched = schedule_state(30, 100)

    mb = MBConv(6, 8, 2, rng=rng, dtype=np.float64)
    x = Tensor(rng.standard_normal((2, 6, 5, 5)), requires_grad=True)
    wrt = [("x", x)] + list(mb.named_parameters())
    _check("mbconv", lambda: mb.forward(x, training=True), wrt, results, rng)

    sp = SpatialAttention(rng=rng, dtype=np.float64)
    x = Tensor(rng.standard_normal((2, 5, 6, 6)), requires_grad=True)
    wrt = [("x", x)] + list(sp.named_parameters())
    _check("spatial_attention", lambda: sp.forward(x), wrt, results, rng)

    for mode in ("eq5", "normalized"):
        dspa = DSPA(8, fusion_mode=mode, rng=rng, dtype=np.float64)
        x = Tensor(rng.standard_normal((2, 8, 4, 4)), requires_grad=True)
        wrt = [("x", x)] + list(dspa.named_parameters())
        _check(f"dspa_{mode}", lambda: dspa.forward(x, sched), wrt, results, rng)

    dspa = DSPA(8, lambda_mode="learnable", rng=rng, dtype=np.float64)
    x = Tensor(rng.standard_normal((2, 8, 4, 4)), requires_grad=True)
    wrt = [("x", x)] + list(dspa.named_parameters())
    _check("dspa_learnable", lambda: dspa.forward(x, sched), wrt, results, rng)
    return results


def mini_config() -> ArchConfig:
    """Smallest architecture that exercises every structural feature."""
    return ArchConfig(
        variant="custom",
        stem_out=8,
        stage_channels=(8, 16, 16),
        expansions=((2, 2, 2, 2),) * 3,
        layers_per_block=4,
        channel_dropout_p=0.0,
        classifier_hidden=16,
        classifier_dropout=0.0,
        num_classes=4,
    )


def network_check(full: bool = False, sample_per_tensor: int = 6,
                  directions: int = 3) -> list[CheckResult]:
    """End-to-end check on the miniature network, training mode, 8x8 input."""
    rng = np.random.default_rng(7)
    model = build_network(mini_config(), rng=rng, dtype=np.float64)
    sched = schedule_state(30, 100)
    x = Tensor(rng.standard_normal((2, 3, 8, 8)), requires_grad=True)
    labels = np.array([0, 1])
    params = list(model.named_parameters())

    def loss_value() -> float:
        logits = model.forward(x, sched, training=True)
        return float(ops.softmax_cross_entropy(logits, labels).data)

    model.zero_grad()
    x.zero_grad()
    loss = ops.softmax_cross_entropy(model.forward(x, sched, training=True), labels)
    loss.backward()

    results: list[CheckResult] = []
    worst_name, worst_rel = "", 0.0
    t0 = time.perf_counter()
    for name, p in [("input", x)] + params:
        flat = p.data.reshape(-1)
        gflat = p.grad.reshape(-1)
        if full or flat.size <= sample_per_tensor:
            idx = np.arange(flat.size)
        else:
            idx = rng.choice(flat.size, size=sample_per_tensor, replace=False)
        analytic = gflat[idx]
        numeric = np.zeros(len(idx))
        for j, i in enumerate(idx):
            old = flat[i]
            flat[i] = old + EPS
            fp = loss_value()
            flat[i] = old - EPS
            fm = loss_value()
            flat[i] = old
            numeric[j] = (fp - fm) / (2.0 * EPS)
        rel = rel_error(analytic, numeric)
        if rel > worst_rel:
            worst_name, worst_rel = name, rel
    label = "network/all-coords" if full else "network/sampled-coords"
    results.append(CheckResult(f"{label} (worst: {worst_name})", worst_rel,
                               worst_rel < TOL, time.perf_counter() - t0))

    # Directional derivatives cover the whole parameter vector at once.
    t0 = time.perf_counter()
    worst_rel = 0.0
    base = loss_value()
    for d in range(directions):
        vecs = [rng.standard_normal(p.data.shape) for _, p in params]
        norm = np.sqrt(sum((v * v).sum() for v in vecs))
        vecs = [v / norm for v in vecs]
        analytic = sum((p.grad * v).sum() for (_, p), v in zip(params, vecs))
        for (_, p), v in zip(params, vecs):
            p.data += EPS * v
        fp = loss_value()
        for (_, p), v in zip(params, vecs):
            p.data -= 2.0 * EPS * v
        fm = loss_value()
        for (_, p), v in zip(params, vecs):
            p.data += EPS * v
        numeric = (fp - fm) / (2.0 * EPS)
        rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)
        worst_rel = max(worst_rel, rel)
    results.append(CheckResult("network/directional", worst_rel,
                               worst_rel < TOL, time.perf_counter() - t0))
    if abs(base - loss_value()) > 1e-9:
        results.append(CheckResult("network/param-restore", 1.0, False, 0.0))
    return results


def run_suite(full: bool = False, log=print) -> bool:
    results = op_checks() + block_checks() + network_check(full=full)
    all_ok = True
    for r in results:
        status = "ok" if r.ok else "FAIL"
        log(f"{r.name:<44} rel={r.rel:.3e}  [{status}]  ({r.seconds:.2f}s)")
        all_ok &= r.ok
    log(f"{'all checks passed' if all_ok else 'CHECKS FAILED'} "
        f"({len(results)} results, tolerance {TOL})")
    return all_ok
