"""Datasets: synthetic Gaussian blobs and the CIFAR-10 binary format."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import DimensionError, DomainError, FormatError
from ..rng import make_rng

CIFAR_RECORD = 3073
CIFAR_PIXELS = 3072
CIFAR_CLASSES = 10


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self) -> None:
        x = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        if x.ndim != 2:
            raise DimensionError(f"features must be N x d, got shape {x.shape}")
        if x.shape[0] != y.shape[0]:
            raise DimensionError(f"{x.shape[0]} feature rows but {y.shape[0]} labels")
        if y.size and (y.min() < 0 or y.max() >= self.num_classes):
            raise DomainError(f"labels must lie in 0..{self.num_classes - 1}")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    def __len__(self) -> int:
        return self.labels.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def subset(self, indices: Sequence[int] | np.ndarray) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx], self.num_classes)


def class_means(num_classes: int, dim: int, separation: float) -> np.ndarray:
    """Blob centres with every pair exactly ``separation`` apart.

    For ``num_classes <= dim`` the centres are scaled standard basis vectors
    (a regular simplex). Otherwise they are placed on a sphere by a fixed
    projection, and pairs are only approximately equidistant.
    """
    if num_classes <= dim:
        means = np.zeros((num_classes, dim))
        means[np.arange(num_classes), np.arange(num_classes)] = separation / np.sqrt(2.0)
        return means
    rng = np.random.Generator(np.random.PCG64(num_classes * 1_000_003 + dim))
    dirs = rng.standard_normal((num_classes, dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return dirs * separation / np.sqrt(2.0)


def gen_synthetic(
    num_classes: int, dim: int, n_per_class: int, separation: float, seed: int = 0
) -> Dataset:
    """Isotropic unit-variance Gaussian blobs, one per class, in class-major order.

    ``separation`` is the distance between blob centres in units of the blob
    standard deviation.
    """
    if num_classes < 1 or dim < 1 or n_per_class < 1 or separation < 0:
        raise DomainError("classes, dims and per-class count must be positive, separation non-negative")
    rng = make_rng(seed, "data")
    means = class_means(num_classes, dim, separation)
    labels = np.repeat(np.arange(num_classes), n_per_class)
    features = means[labels] + rng.standard_normal((labels.size, dim))
    return Dataset(features, labels, num_classes)


def stratified_split(dataset: Dataset, test_per_class: int, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Hold out ``test_per_class`` random samples of every class as a test set."""
    if test_per_class < 0:
        raise DomainError("test_per_class must be non-negative")
    rng = make_rng(seed, "split")
    train_idx, test_idx = [], []
    for c in range(dataset.num_classes):
        idx = rng.permutation(np.flatnonzero(dataset.labels == c))
        if idx.size <= test_per_class:
            raise DomainError(f"class {c} has {idx.size} samples, cannot hold out {test_per_class}")
        test_idx.append(idx[:test_per_class])
        train_idx.append(idx[test_per_class:])
    return (
        dataset.subset(np.sort(np.concatenate(train_idx))),
        dataset.subset(np.sort(np.concatenate(test_idx))),
    )


def write_dataset_csv(dataset: Dataset, path: str | Path) -> None:
    """Debug export: ``label,f0,f1,...`` with one row per sample."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label"] + [f"f{i}" for i in range(dataset.dim)])
        for y, row in zip(dataset.labels, dataset.features):
            w.writerow([int(y)] + [repr(float(v)) for v in row])


def parse_cifar10_bytes(raw: bytes, source: str = "<bytes>") -> Dataset:
    if len(raw) % CIFAR_RECORD:
        raise FormatError(f"{source}: length {len(raw)} is not a multiple of {CIFAR_RECORD}")
    records = np.frombuffer(raw, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
    labels = records[:, 0].astype(np.int64)
    if labels.size and labels.max() >= CIFAR_CLASSES:
        bad = int(np.argmax(labels >= CIFAR_CLASSES))
        raise FormatError(f"{source}: record {bad} has label byte {labels[bad]} > 9")
    features = records[:, 1:].astype(np.float64) / 255.0
    return Dataset(features, labels, CIFAR_CLASSES)


def load_cifar10_bin(path: str | Path | Sequence[str | Path]) -> Dataset:
    """Read one or more CIFAR-10 binary batch files.

    Each record is one label byte followed by 3072 channel-planar pixel bytes.
    Pixels are scaled to [0, 1]. Several paths are concatenated in order.
    """
    paths = [path] if isinstance(path, (str, Path)) else list(path)
    parts = [parse_cifar10_bytes(Path(p).read_bytes(), str(p)) for p in paths]
    if len(parts) == 1:
        return parts[0]
    return Dataset(
        np.concatenate([p.features for p in parts]) if parts else np.zeros((0, CIFAR_PIXELS)),
        np.concatenate([p.labels for p in parts]) if parts else np.zeros(0, dtype=np.int64),
        CIFAR_CLASSES,
    )


def load_cifar10_dir(directory: str | Path) -> tuple[Dataset, Dataset]:
    """Load the standard ``data_batch_*.bin`` / ``test_batch.bin`` layout."""
    d = Path(directory)
    train_files = sorted(d.glob("data_batch_*.bin"))
    test_file = d / "test_batch.bin"
    if not train_files or not test_file.exists():
        raise FormatError(f"{d}: expected data_batch_*.bin and test_batch.bin")
    return load_cifar10_bin(train_files), load_cifar10_bin(test_file)
