"""Single-file checkpoint container.

Layout: 8-byte magic, little-endian u64 header length, UTF-8 JSON header
(embedded arch config, tensor manifest with name/shape/dtype/offset,
optimizer step, schedule clock, rng state, metrics summary), then raw
little-endian tensor payloads in manifest order. Saving the result of a
load reproduces the file byte for byte.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .config import ArchConfig, config_from_dict, config_to_dict
from .network import Network, build_network
from .optim import AdamW

MAGIC = b"FBCKPT01"
VERSION = 1


class CheckpointError(ValueError):
    """Raised for malformed files or config/shape mismatches on restore."""


def _model_entries(model: Network) -> list[tuple[str, np.ndarray]]:
    entries = [(f"param.{name}", p.data) for name, p in model.named_parameters()]
    entries += [(f"buffer.{name}", b) for name, b in model.named_buffers()]
    return entries


def save_checkpoint(path: str, model: Network, optimizer: AdamW | None = None,
                    schedule: dict | None = None, rng_state: dict | None = None,
                    metrics: dict | None = None) -> None:
    entries = _model_entries(model)
    if optimizer is not None:
        state = optimizer.state_dict()
        entries += [(f"adam_m.{name}", arr) for name, arr in state["m"].items()]
        entries += [(f"adam_v.{name}", arr) for name, arr in state["v"].items()]

    manifest = []
    payloads = []
    offset = 0
    for name, arr in entries:
        arr = np.ascontiguousarray(arr)
        dt = arr.dtype.str
        if dt[0] not in ("<", "|"):
            arr = arr.astype(arr.dtype.newbyteorder("<"))
            dt = arr.dtype.str
        blob = arr.tobytes()
        manifest.append({"name": name, "shape": list(arr.shape), "dtype": dt,
                         "offset": offset})
        payloads.append(blob)
        offset += len(blob)

    header = {
        "version": VERSION,
        "arch": config_to_dict(model.cfg),
        "manifest": manifest,
        "optimizer": {"step_count": optimizer.step_count} if optimizer else None,
        "schedule": schedule,
        "rng_state": rng_state,
        "metrics": metrics,
    }
    header_bytes = json.dumps(header, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header_bytes)))
        fh.write(header_bytes)
        for blob in payloads:
            fh.write(blob)


@dataclass
class CheckpointData:
    arch: ArchConfig
    tensors: dict[str, np.ndarray]
    optimizer_step: int | None
    schedule: dict | None
    rng_state: dict | None
    metrics: dict | None


def load_checkpoint(path: str) -> CheckpointData:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < len(MAGIC) + 8 or raw[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file (bad magic)")
    (header_len,) = struct.unpack_from("<Q", raw, len(MAGIC))
    header_start = len(MAGIC) + 8
    payload_start = header_start + header_len
    if payload_start > len(raw):
        raise CheckpointError(f"{path}: header length {header_len} exceeds file size")
    try:
        header = json.loads(raw[header_start:payload_start].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: invalid header: {exc}") from exc
    if header.get("version") != VERSION:
        raise CheckpointError(f"{path}: unsupported version {header.get('version')}")

    tensors = {}
    for entry in header["manifest"]:
        dtype = np.dtype(entry["dtype"])
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = payload_start + entry["offset"]
        end = start + count * dtype.itemsize
        if end > len(raw):
            raise CheckpointError(f"{path}: payload for {entry['name']!r} is truncated")
        tensors[entry["name"]] = np.frombuffer(raw[start:end], dtype=dtype).reshape(shape).copy()

    opt = header.get("optimizer")
    return CheckpointData(
        arch=config_from_dict(header["arch"]),
        tensors=tensors,
        optimizer_step=opt["step_count"] if opt else None,
        schedule=header.get("schedule"),
        rng_state=header.get("rng_state"),
        metrics=header.get("metrics"),
    )


def restore_model(ckpt: CheckpointData, model: Network) -> None:
    """Copy checkpoint tensors into a model of matching architecture."""
    if ckpt.arch != model.cfg:
        raise CheckpointError(
            "checkpoint architecture does not match the requested config: "
            f"{ckpt.arch} vs {model.cfg}")
    for kind, pairs in (("param", model.named_parameters()),
                        ("buffer", model.named_buffers())):
        for name, target in pairs:
            key = f"{kind}.{name}"
            if key not in ckpt.tensors:
                raise CheckpointError(f"checkpoint is missing tensor {key!r}")
            src = ckpt.tensors[key]
            dest = target.data if kind == "param" else target
            if src.shape != dest.shape:
                raise CheckpointError(
                    f"tensor {key!r} has shape {src.shape}, expected {dest.shape}")
            dest[...] = src.astype(dest.dtype, copy=False)


def restore_optimizer(ckpt: CheckpointData, optimizer: AdamW) -> None:
    if ckpt.optimizer_step is None:
        raise CheckpointError("checkpoint carries no optimizer state")
    m = {}
    v = {}
    for key, arr in ckpt.tensors.items():
        if key.startswith("adam_m."):
            m[key[len("adam_m."):]] = arr
        elif key.startswith("adam_v."):
            v[key[len("adam_v."):]] = arr
    missing = [n for n in optimizer.names if n not in m or n not in v]
    if missing:
        raise CheckpointError(f"checkpoint is missing optimizer moments for {missing}")
    optimizer.load_state_dict({"step_count": ckpt.optimizer_step, "m": m, "v": v})


def build_from_checkpoint(ckpt: CheckpointData, dtype=np.float32) -> Network:
    model = build_network(ckpt.arch, rng=0, dtype=dtype)
    restore_model(ckpt, model)
    return model
