"""Training loop: per-epoch schedule stepping, metrics CSV, checkpoints."""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .checkpoint import save_checkpoint
from .config import ArchConfig
from .data import DatasetHandle, batches
from .network import Network, build_network
from .optim import AdamW
from .schedules import ScheduleState, schedule_state
from .tensor import NonFiniteError, no_grad
from . import ops

CSV_HEADER = ("epoch,train_loss,train_acc,val_loss,val_acc,"
              "alpha_t,beta_t,lambda_t,scale_t,wall_seconds")


@dataclass
class TrainConfig:
    epochs: int
    batch_size: int = 256
    lr: float = 0.001
    weight_decay: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    eval_every: int = 1
    augment: bool = False
    cosine_decay: bool = False
    target_train_acc: float | None = None

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError(f"betas must lie in [0, 1), got {self.beta1}, {self.beta2}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.eval_every < 1:
            raise ValueError(f"eval_every must be >= 1, got {self.eval_every}")


@dataclass
class MetricsRow:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float
    alpha_t: float
    beta_t: float
    lambda_t: float
    scale_t: float
    wall_seconds: float

    def to_csv(self) -> str:
        return ",".join([str(self.epoch)] + [
            repr(float(v)) for v in (
                self.train_loss, self.train_acc, self.val_loss, self.val_acc,
                self.alpha_t, self.beta_t, self.lambda_t, self.scale_t,
                self.wall_seconds)
        ])


@dataclass
class TrainResult:
    model: Network
    rows: list[MetricsRow] = field(default_factory=list)
    csv_path: str = ""
    last_path: str = ""
    best_path: str = ""
    best_val_acc: float = -1.0
    epochs_run: int = 0


def evaluate(model: Network, ds: DatasetHandle, sched: ScheduleState,
             batch_size: int = 256) -> tuple[float, float]:
    """Eval-mode mean loss and top-1 accuracy over a dataset."""
    if len(ds) == 0:
        raise ValueError("evaluate: empty dataset")
    total_loss = 0.0
    correct = 0
    with no_grad():
        for x, y in batches(ds, batch_size, shuffle=False, augment=False):
            logits = model.forward(x, sched, training=False)
            loss = ops.softmax_cross_entropy(logits, y)
            total_loss += float(loss.data) * len(y)
            correct += int((logits.data.argmax(axis=1) == y).sum())
    n = len(ds)
    return total_loss / n, correct / n


def _schedule_for(cfg: ArchConfig, t: int, T: int) -> ScheduleState:
    base, ramp = cfg.beta_schedule
    return schedule_state(t, T, beta_base=base, beta_ramp=ramp,
                          phase=cfg.phase_schedule, mode=cfg.lambda_mode)


def train(arch: ArchConfig, train_ds: DatasetHandle, val_ds: DatasetHandle,
          cfg: TrainConfig, out_dir: str, clock=time.perf_counter,
          log=None) -> TrainResult:
    """Run the full loop; write metrics.csv, last.ckpt, and best.ckpt.

    The clock argument exists so tests can substitute a deterministic
    timer and obtain byte-identical CSVs.
    """
    os.makedirs(out_dir, exist_ok=True)
    model = build_network(arch, rng=np.random.default_rng(cfg.seed))
    opt = AdamW(list(model.named_parameters()), lr=cfg.lr,
                betas=(cfg.beta1, cfg.beta2), eps=cfg.eps,
                weight_decay=cfg.weight_decay)
    drop_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))

    result = TrainResult(model=model)
    result.csv_path = os.path.join(out_dir, "metrics.csv")
    result.last_path = os.path.join(out_dir, "last.ckpt")
    result.best_path = os.path.join(out_dir, "best.ckpt")

    start = clock()
    with open(result.csv_path, "w", encoding="utf-8", newline="\n") as csv:
        csv.write(CSV_HEADER + "\n")
        for t in range(cfg.epochs):
            sched = _schedule_for(arch, t, cfg.epochs)
            if cfg.cosine_decay:
                opt.lr = cfg.lr * 0.5 * (1.0 + math.cos(math.pi * t / cfg.epochs))
            epoch_loss = 0.0
            correct = 0
            for b, (x, y) in enumerate(batches(
                    train_ds, cfg.batch_size, shuffle=True,
                    seed=np.random.SeedSequence([cfg.seed, 2, t]),
                    augment=cfg.augment)):
                logits = model.forward(x, sched, training=True, rng=drop_rng)
                loss = ops.softmax_cross_entropy(logits, y)
                if not np.isfinite(loss.data):
                    raise NonFiniteError(
                        f"loss became non-finite at epoch {t}, batch {b}")
                opt.zero_grad()
                loss.backward()
                opt.step()
                epoch_loss += float(loss.data) * len(y)
                correct += int((logits.data.argmax(axis=1) == y).sum())

            train_loss = epoch_loss / len(train_ds)
            train_acc = correct / len(train_ds)
            if t % cfg.eval_every == 0 or t == cfg.epochs - 1:
                val_loss, val_acc = evaluate(model, val_ds, sched, cfg.batch_size)
            else:
                val_loss, val_acc = float("nan"), float("nan")

            row = MetricsRow(
                epoch=t, train_loss=train_loss, train_acc=train_acc,
                val_loss=val_loss, val_acc=val_acc,
                alpha_t=sched.alpha_t, beta_t=sched.beta_t,
                lambda_t=model.lambda_value(sched), scale_t=sched.scale_t,
                wall_seconds=clock() - start)
            result.rows.append(row)
            csv.write(row.to_csv() + "\n")
            if log is not None:
                log(f"epoch {t}: train_loss={train_loss:.4f} "
                    f"train_acc={train_acc:.4f} val_acc={val_acc:.4f}")

            result.epochs_run = t + 1
            if not math.isnan(val_acc) and val_acc > result.best_val_acc:
                result.best_val_acc = val_acc
                save_checkpoint(
                    result.best_path, model, opt,
                    schedule={"t": t, "T": cfg.epochs},
                    rng_state=drop_rng.bit_generator.state,
                    metrics={"epoch": t, "val_acc": val_acc, "val_loss": val_loss})
            if (cfg.target_train_acc is not None
                    and not math.isnan(val_acc)
                    and val_acc >= cfg.target_train_acc):
                break

    last_epoch = result.epochs_run - 1
    save_checkpoint(
        result.last_path, model, opt,
        schedule={"t": last_epoch, "T": cfg.epochs},
        rng_state=drop_rng.bit_generator.state,
        metrics={"epoch": last_epoch, "best_val_acc": result.best_val_acc})
    return result
