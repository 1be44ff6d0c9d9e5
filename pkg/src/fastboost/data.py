"""Dataset ingestion: CIFAR binary parsing, synthetic gratings, batching."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor

CIFAR10_RECORD = 3073
CIFAR100_RECORD = 3074
PLANE = 32 * 32

CIFAR10_MEAN = np.array([0.4914, 0.4822, 0.4465])
CIFAR10_STD = np.array([0.2470, 0.2435, 0.2616])


class TruncatedFileError(ValueError):
    """File length is not a whole number of records; offset marks the cut."""

    def __init__(self, message: str, offset: int):
        super().__init__(message)
        self.offset = offset


class CorruptRecordError(ValueError):
    """A record carries an out-of-range label; index locates the record."""

    def __init__(self, message: str, index: int):
        super().__init__(message)
        self.index = index


@dataclass(eq=False)
class ImageRecord:
    """One image: uint8 pixels in (3, 32, 32) plane order R,G,B."""

    label: int
    pixels: np.ndarray
    coarse_label: int | None = None

    def __eq__(self, other):
        return (
            isinstance(other, ImageRecord)
            and self.label == other.label
            and self.coarse_label == other.coarse_label
            and np.array_equal(self.pixels, other.pixels)
        )


@dataclass
class DatasetHandle:
    records: list[ImageRecord]
    split: str = "train"
    mean: np.ndarray = field(default_factory=lambda: CIFAR10_MEAN.copy())
    std: np.ndarray = field(default_factory=lambda: CIFAR10_STD.copy())

    def __len__(self):
        return len(self.records)


def parse_cifar10(data: bytes) -> list[ImageRecord]:
    """Parse 3073-byte records: 1 label byte + 3072 pixel bytes."""
    n = len(data)
    if n % CIFAR10_RECORD:
        offset = (n // CIFAR10_RECORD) * CIFAR10_RECORD
        raise TruncatedFileError(
            f"file length {n} is not a multiple of {CIFAR10_RECORD}; "
            f"truncated record starts at byte {offset}", offset)
    arr = np.frombuffer(data, dtype=np.uint8).reshape(-1, CIFAR10_RECORD)
    labels = arr[:, 0]
    bad = labels >= 10
    if bad.any():
        i = int(np.argmax(bad))
        raise CorruptRecordError(
            f"record {i} has label {labels[i]}, outside [0, 10)", i)
    return [
        ImageRecord(label=int(labels[i]), pixels=arr[i, 1:].reshape(3, 32, 32).copy())
        for i in range(arr.shape[0])
    ]


def serialize_cifar10(records: list[ImageRecord]) -> bytes:
    out = np.empty((len(records), CIFAR10_RECORD), dtype=np.uint8)
    for i, rec in enumerate(records):
        out[i, 0] = rec.label
        out[i, 1:] = rec.pixels.reshape(-1)
    return out.tobytes()


def parse_cifar100(data: bytes) -> list[ImageRecord]:
    """Parse 3074-byte records: coarse byte, fine byte, 3072 pixel bytes."""
    n = len(data)
    if n % CIFAR100_RECORD:
        offset = (n // CIFAR100_RECORD) * CIFAR100_RECORD
        raise TruncatedFileError(
            f"file length {n} is not a multiple of {CIFAR100_RECORD}; "
            f"truncated record starts at byte {offset}", offset)
    arr = np.frombuffer(data, dtype=np.uint8).reshape(-1, CIFAR100_RECORD)
    coarse, fine = arr[:, 0], arr[:, 1]
    bad = (coarse >= 20) | (fine >= 100)
    if bad.any():
        i = int(np.argmax(bad))
        raise CorruptRecordError(
            f"record {i} has coarse label {coarse[i]} / fine label {fine[i]}, "
            f"outside [0, 20) / [0, 100)", i)
    return [
        ImageRecord(label=int(fine[i]), coarse_label=int(coarse[i]),
                    pixels=arr[i, 2:].reshape(3, 32, 32).copy())
        for i in range(arr.shape[0])
    ]


def serialize_cifar100(records: list[ImageRecord]) -> bytes:
    out = np.empty((len(records), CIFAR100_RECORD), dtype=np.uint8)
    for i, rec in enumerate(records):
        out[i, 0] = 0 if rec.coarse_label is None else rec.coarse_label
        out[i, 1] = rec.label
        out[i, 2:] = rec.pixels.reshape(-1)
    return out.tobytes()


def class_pattern(k: int, num_classes: int, hw: int = 32) -> np.ndarray:
    """Noise-free base image for class k: an orientation/frequency grating."""
    theta = np.pi * k / num_classes
    freq = 3 + (k % 4)
    i, j = np.meshgrid(np.arange(hw), np.arange(hw), indexing="ij")
    u = (j * np.cos(theta) + i * np.sin(theta)) / hw
    phases = np.array([0.0, 2 * np.pi / 3, 4 * np.pi / 3])
    waves = np.sin(2 * np.pi * freq * u[None, :, :] + phases[:, None, None])
    return 127.5 + 100.0 * waves


def synthetic_dataset(n: int, num_classes: int, seed: int, hw: int = 32,
                      noise_std: float = 10.0, split: str = "train") -> DatasetHandle:
    """Separable class-conditional gratings with seeded pixel noise."""
    if n < num_classes:
        raise ValueError(f"need at least {num_classes} samples, got {n}")
    rng = np.random.default_rng(seed)
    patterns = [class_pattern(k, num_classes, hw) for k in range(num_classes)]
    records = []
    for i in range(n):
        k = i % num_classes
        img = patterns[k] + rng.normal(0.0, noise_std, (3, hw, hw))
        pixels = np.clip(np.rint(img), 0, 255).astype(np.uint8)
        records.append(ImageRecord(label=k, pixels=pixels))
    return DatasetHandle(records=records, split=split)


def compute_stats(records: list[ImageRecord]) -> tuple[np.ndarray, np.ndarray]:
    """Per-channel mean/std of pixels/255 across a record list."""
    stacked = np.stack([r.pixels for r in records]).astype(np.float64) / 255.0
    return stacked.mean(axis=(0, 2, 3)), stacked.std(axis=(0, 2, 3))


def normalize(pixels: np.ndarray, mean: np.ndarray = CIFAR10_MEAN,
              std: np.ndarray = CIFAR10_STD, dtype=np.float32) -> np.ndarray:
    """Map uint8 pixels to (pixel/255 - mean_c)/std_c per channel."""
    mean = np.asarray(mean, dtype=np.float64)
    std = np.asarray(std, dtype=np.float64)
    if (std == 0).any():
        raise ValueError("normalize: zero std for at least one channel")
    x = pixels.astype(np.float64) / 255.0
    shape = (3, 1, 1) if pixels.ndim == 3 else (1, 3, 1, 1)
    out = (x - mean.reshape(shape)) / std.reshape(shape)
    return out.astype(dtype)


def _augment_one(pixels: np.ndarray, rng: np.random.Generator, pad: int = 4) -> np.ndarray:
    if rng.random() < 0.5:
        pixels = pixels[:, :, ::-1]
    hw_h, hw_w = pixels.shape[1], pixels.shape[2]
    padded = np.pad(pixels, ((0, 0), (pad, pad), (pad, pad)), mode="reflect")
    oy = int(rng.integers(0, 2 * pad + 1))
    ox = int(rng.integers(0, 2 * pad + 1))
    return padded[:, oy : oy + hw_h, ox : ox + hw_w]


def batches(ds: DatasetHandle, batch_size: int, shuffle: bool = False,
            seed: int = 0, augment: bool = False, dtype=np.float32):
    """Yield (Tensor[N,3,H,W], labels[N]) covering every record exactly once.

    The final partial batch is kept. With a fixed seed the full sequence,
    including shuffling and augmentation draws, is deterministic.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    n = len(ds.records)
    if n == 0:
        raise ValueError("batches: empty dataset")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n) if shuffle else np.arange(n)
    for start in range(0, n, batch_size):
        idx = order[start : start + batch_size]
        imgs = []
        for i in idx:
            px = ds.records[i].pixels
            if augment:
                px = _augment_one(px, rng)
            imgs.append(px)
        x = normalize(np.stack(imgs), ds.mean, ds.std, dtype=dtype)
        y = np.array([ds.records[i].label for i in idx], dtype=np.int64)
        yield Tensor(x), y
