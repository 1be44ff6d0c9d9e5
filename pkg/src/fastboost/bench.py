"""Timing comparison of the numba and numpy kernel backends."""

from __future__ import annotations

import time

import numpy as np

from . import kernels as K
from . import ops
from .config import tiny_config
from .network import build_network
from .schedules import schedule_state
from .tensor import Tensor, no_grad


def _time(fn, repeats: int, warmup: int = 1) -> float:
    for _ in range(warmup):
        fn()
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _kernel_cases(rng):
    x = rng.standard_normal((8, 32, 16, 16)).astype(np.float32)
    w = rng.standard_normal((64, 32, 3, 3)).astype(np.float32)
    gy = rng.standard_normal((8, 64, 16, 16)).astype(np.float32)
    xd = rng.standard_normal((8, 64, 16, 16)).astype(np.float32)
    wd = rng.standard_normal((64, 3, 3)).astype(np.float32)
    return [
        ("conv3x3_fwd", lambda: K.conv2d_forward(x, w, 1)),
        ("conv3x3_bwd_w", lambda: K.conv2d_bwd_weight(gy, x, 3, 3, 1)),
        ("conv3x3_bwd_x", lambda: K.conv2d_bwd_input(
            rng.standard_normal((8, 64, 14, 14)).astype(np.float32), w, 16, 16, 1)),
        ("depthwise_fwd", lambda: K.depthwise_forward(xd, wd, 1)),
        ("depthwise_bwd_w", lambda: K.depthwise_bwd_weight(
            gy[:, :, :14, :14], xd, 3, 3, 1)),
        ("maxpool_fwd", lambda: K.maxpool_forward(xd, 2, 2)),
    ]


def run_bench(batch: int = 32, repeats: int = 3, log=print) -> list[dict]:
    """Time kernel microbenchmarks and a tiny-network step on each backend."""
    backends = ["numpy"]
    try:
        import numba  # noqa: F401
        backends.append("numba")
    except ImportError:
        log("numba not importable; benchmarking numpy only")

    rng = np.random.default_rng(0)
    xb = rng.standard_normal((batch, 3, 32, 32)).astype(np.float32)
    yb = rng.integers(0, 10, batch)
    sched = schedule_state(0, 100)
    rows: list[dict] = []
    previous = K.backend_name()
    try:
        for backend in backends:
            K.select(backend)
            for name, fn in _kernel_cases(np.random.default_rng(1)):
                rows.append({"backend": backend, "case": name,
                             "seconds": _time(fn, repeats)})
            model = build_network(tiny_config(), rng=0)

            def fwd():
                with no_grad():
                    model.forward(Tensor(xb), sched, training=False)

            def step():
                logits = model.forward(Tensor(xb), sched, training=True,
                                       rng=np.random.default_rng(2))
                loss = ops.softmax_cross_entropy(logits, yb)
                model.zero_grad()
                loss.backward()

            rows.append({"backend": backend, "case": f"tiny_forward_b{batch}",
                         "seconds": _time(fwd, repeats)})
            rows.append({"backend": backend, "case": f"tiny_fwd_bwd_b{batch}",
                         "seconds": _time(step, repeats)})
    finally:
        K.select(previous)

    log(f"{'case':<22} {'numpy':>10} {'numba':>10} {'speedup':>9}")
    by_case: dict[str, dict[str, float]] = {}
    for row in rows:
        by_case.setdefault(row["case"], {})[row["backend"]] = row["seconds"]
    for case, times in by_case.items():
        np_t = times.get("numpy")
        nb_t = times.get("numba")
        ratio = f"{np_t / nb_t:>8.2f}x" if np_t and nb_t else "      n/a"
        log(f"{case:<22} {np_t:>9.4f}s {nb_t if nb_t else float('nan'):>9.4f}s {ratio}")
    return rows
