"""Command-line interface: train, eval, analyze, gradcheck, export-config, bench."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import analysis, bench, gradcheck
from .checkpoint import CheckpointError, build_from_checkpoint, load_checkpoint
from .config import (ConfigError, base_config, config_to_json, load_config,
                     pattern_config, save_config, tiny_config)
from .data import (CorruptRecordError, DatasetHandle, TruncatedFileError,
                   parse_cifar10, synthetic_dataset)
from .schedules import schedule_state
from .tensor import GeometryError, NonFiniteError, ShapeError
from .train import TrainConfig, evaluate, train

_RUNTIME_ERRORS = (ConfigError, CheckpointError, TruncatedFileError,
                   CorruptRecordError, ShapeError, GeometryError,
                   NonFiniteError, ValueError, OSError)


def _parse_pattern(text: str) -> tuple[int, ...]:
    try:
        parts = tuple(int(p) for p in text.split("-"))
    except ValueError:
        raise ConfigError(f"bad expansion pattern {text!r}; expected like 2-4-6-8")
    if not parts:
        raise ConfigError(f"bad expansion pattern {text!r}")
    return parts


def _load_cifar_dir(root: str, limit: int | None, split: str) -> DatasetHandle:
    base = Path(root)
    if split == "train":
        files = sorted(base.glob("data_batch_*.bin")) or sorted(base.glob("data_batch_*"))
    else:
        files = sorted(base.glob("test_batch.bin")) or sorted(base.glob("test_batch*"))
    if not files:
        raise FileNotFoundError(f"no CIFAR batch files for split {split!r} under {root}")
    records = []
    for f in files:
        records.extend(parse_cifar10(f.read_bytes()))
        if limit is not None and len(records) >= limit:
            break
    if limit is not None:
        records = records[:limit]
    return DatasetHandle(records=records, split=split)


def _build_datasets(args, num_classes: int):
    if args.data == "synthetic":
        ds = synthetic_dataset(args.synthetic_n, num_classes, seed=args.seed)
        return ds, ds
    train_ds = _load_cifar_dir(args.data, args.train_limit, "train")
    val_ds = _load_cifar_dir(args.data, args.val_limit, "test")
    return train_ds, val_ds


def _cmd_train(args) -> int:
    arch = load_config(args.arch)
    train_ds, val_ds = _build_datasets(args, arch.num_classes)
    cfg = TrainConfig(
        epochs=args.epochs, batch_size=args.batch, lr=args.lr,
        weight_decay=args.weight_decay, seed=args.seed,
        eval_every=args.eval_every, augment=args.augment,
        cosine_decay=args.cosine_decay, target_train_acc=args.target_acc)
    result = train(arch, train_ds, val_ds, cfg, args.out, log=print)
    print(f"done: {result.epochs_run} epochs, best val_acc "
          f"{result.best_val_acc:.4f}, metrics at {result.csv_path}")
    return 0


def _cmd_eval(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    model = build_from_checkpoint(ckpt)
    sched_info = ckpt.schedule or {}
    t = int(sched_info.get("t", 0))
    total = int(sched_info.get("T", max(t, 1)))
    base, ramp = ckpt.arch.beta_schedule
    sched = schedule_state(t, total, beta_base=base, beta_ramp=ramp,
                           phase=ckpt.arch.phase_schedule,
                           mode=ckpt.arch.lambda_mode)
    if args.data == "synthetic":
        ds = synthetic_dataset(args.synthetic_n, ckpt.arch.num_classes, seed=args.seed)
    else:
        ds = _load_cifar_dir(args.data, args.val_limit, "test")
    loss, acc = evaluate(model, ds, sched, batch_size=args.batch)
    print(f"loss={loss:.6f} accuracy={acc:.4f} ({len(ds)} samples)")
    return 0


def _cmd_analyze(args) -> int:
    if args.sweep:
        patterns = [_parse_pattern(p) for p in args.sweep.split(",")]
        configs = [pattern_config(p, num_classes=args.num_classes) for p in patterns]
        csv = analysis.sweep_csv(configs, input_hw=args.input_size)
        if args.out:
            Path(args.out).write_text(csv, encoding="utf-8")
            print(f"wrote {args.out}")
        else:
            sys.stdout.write(csv)
        return 0
    if args.arch:
        cfg = load_config(args.arch)
    elif args.variant:
        cfg = tiny_config() if args.variant == "tiny" else base_config()
    else:
        raise ConfigError("analyze needs --arch, --variant, or --sweep")
    report = analysis.count_macs(cfg, args.input_size)
    print(report.format())
    return 0


def _cmd_gradcheck(args) -> int:
    return 0 if gradcheck.run_suite(full=args.full) else 1


def _cmd_export_config(args) -> int:
    cfg = tiny_config(args.num_classes) if args.variant == "tiny" \
        else base_config(args.num_classes)
    if args.out:
        save_config(cfg, args.out)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(config_to_json(cfg))
    return 0


def _cmd_bench(args) -> int:
    bench.run_bench(batch=args.batch, repeats=args.repeats)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fastboost",
        description="Train, evaluate, and analyze FastBoost models.")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--arch", required=True, help="architecture config JSON")
    p.add_argument("--data", required=True,
                   help="CIFAR-10 binary directory, or 'synthetic'")
    p.add_argument("--epochs", type=int, required=True)
    p.add_argument("--batch", type=int, default=256)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--weight-decay", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--eval-every", type=int, default=1)
    p.add_argument("--augment", action="store_true")
    p.add_argument("--cosine-decay", action="store_true")
    p.add_argument("--target-acc", type=float, default=None,
                   help="stop early when val accuracy reaches this value")
    p.add_argument("--synthetic-n", type=int, default=256)
    p.add_argument("--train-limit", type=int, default=None)
    p.add_argument("--val-limit", type=int, default=None)
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--batch", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--synthetic-n", type=int, default=256)
    p.add_argument("--val-limit", type=int, default=None)
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("analyze", help="static parameter/FLOP report")
    p.add_argument("--arch", default=None)
    p.add_argument("--variant", choices=["tiny", "base"], default=None)
    p.add_argument("--input-size", type=int, default=32)
    p.add_argument("--sweep", default=None,
                   help="comma-separated expansion patterns, e.g. 1-1-1-1,2-2-2-2")
    p.add_argument("--num-classes", type=int, default=10)
    p.add_argument("--out", default=None, help="write sweep CSV here")
    p.set_defaults(fn=_cmd_analyze)

    p = sub.add_parser("gradcheck", help="finite-difference gradient suite")
    p.add_argument("--full", action="store_true",
                   help="check every coordinate of the miniature network")
    p.set_defaults(fn=_cmd_gradcheck)

    p = sub.add_parser("export-config", help="emit a canonical variant config")
    p.add_argument("--variant", choices=["tiny", "base"], required=True)
    p.add_argument("--num-classes", type=int, default=10)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_export_config)

    p = sub.add_parser("bench", help="compare kernel backends")
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--repeats", type=int, default=3)
    p.set_defaults(fn=_cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "fn", None):
        parser.print_usage(sys.stderr)
        return 2
    try:
        return args.fn(args)
    except _RUNTIME_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
