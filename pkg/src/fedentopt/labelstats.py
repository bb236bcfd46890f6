"""Label-count bookkeeping and Shannon entropy (base 2)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Iterable

import numpy as np

from .errors import DimensionError, DomainError, ZeroMassError

SUM_TOL = 1e-9


@dataclass(frozen=True)
class LabelCounts:
    """Per-client label histogram.

    Counts are real-valued so that noised (DP) counts use the same type.
    """

    counts: np.ndarray
    client_id: Hashable = None

    def __post_init__(self) -> None:
        arr = np.array(self.counts, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise DimensionError(f"counts must be a non-empty 1-D vector, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise DomainError("counts must be finite and non-negative")
        arr.setflags(write=False)
        object.__setattr__(self, "counts", arr)

    @property
    def num_classes(self) -> int:
        return self.counts.size

    @property
    def total(self) -> float:
        return float(self.counts.sum())


@dataclass(frozen=True)
class LabelDistribution:
    probs: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.probs, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise DimensionError(f"probs must be a non-empty 1-D vector, got shape {arr.shape}")
        if np.any(arr < 0) or np.any(arr > 1) or abs(arr.sum() - 1.0) > SUM_TOL:
            raise DomainError("probs must lie in [0, 1] and sum to 1")
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)


def _as_array(x: LabelCounts | LabelDistribution | np.ndarray | Iterable[float]) -> np.ndarray:
    if isinstance(x, LabelCounts):
        return x.counts
    if isinstance(x, LabelDistribution):
        return x.probs
    return np.asarray(x, dtype=np.float64)


def normalize(counts: LabelCounts | np.ndarray | Iterable[float]) -> LabelDistribution:
    arr = _as_array(counts)
    total = arr.sum()
    if not total > 0:
        raise ZeroMassError("cannot normalize a count vector with zero total")
    return LabelDistribution(arr / total)


def entropy(dist: LabelDistribution | np.ndarray | Iterable[float]) -> float:
    """Shannon entropy in bits, with 0 * log2(0) taken as 0."""
    p = _as_array(dist)
    nz = p[p > 0]
    h = -float(np.sum(nz * np.log2(nz)))
    # -0.0 for degenerate distributions
    return h if h > 0 else 0.0


def aggregate_counts(cohort: Iterable[LabelCounts | np.ndarray]) -> LabelCounts:
    arrays = [_as_array(c) for c in cohort]
    if not arrays:
        raise DomainError("cohort must be non-empty")
    size = arrays[0].size
    total = np.zeros(size)
    for a in arrays:
        if a.size != size:
            raise DimensionError(f"count vectors of length {size} and {a.size} cannot be summed")
        total = total + a
    return LabelCounts(total)


def all_labels_present_threshold(num_classes: int) -> float:
    """Entropy in bits above which every one of ``num_classes`` labels must be present."""
    if num_classes < 2:
        raise DomainError(f"need at least 2 classes, got {num_classes}")
    return math.log2(num_classes - 1)


def row_entropies(matrix: np.ndarray) -> np.ndarray:
    """Entropy in bits of each row of a non-negative matrix after row normalization."""
    m = np.asarray(matrix, dtype=np.float64)
    totals = m.sum(axis=1, keepdims=True)
    if np.any(totals <= 0):
        raise ZeroMassError("every row must have positive mass")
    p = m / totals
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return np.maximum(-terms.sum(axis=1), 0.0)
