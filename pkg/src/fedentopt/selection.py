"""Client selection: greedy entropy maximization with a FIFO exclusion buffer,
and the uniform-random baseline.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, DomainError, InfeasibleError
from .labelstats import LabelCounts, entropy, normalize, row_entropies

# entropies closer than this are treated as equal; the lower client id wins
TIE_TOL = 1e-12


@dataclass(frozen=True)
class ClientRegistry:
    """What the server knows before training: one label-count vector per client.

    Client ids are the row positions ``0..K-1``.
    """

    counts: np.ndarray
    sizes: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        m = np.array(self.counts, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] == 0:
            raise DimensionError(f"registry counts must be a K x C matrix, got shape {m.shape}")
        if np.any(m < 0) or not np.all(np.isfinite(m)):
            raise DomainError("registry counts must be finite and non-negative")
        if np.any(m.sum(axis=1) <= 0):
            raise DomainError("every registered client needs positive total count")
        m.setflags(write=False)
        object.__setattr__(self, "counts", m)
        if self.sizes is not None and len(self.sizes) != m.shape[0]:
            raise DimensionError("sizes must have one entry per client")

    @classmethod
    def from_label_counts(cls, items: Sequence[LabelCounts], sizes: Sequence[int] | None = None) -> "ClientRegistry":
        return cls(np.stack([c.counts for c in items]), tuple(sizes) if sizes is not None else None)

    @property
    def num_clients(self) -> int:
        return self.counts.shape[0]

    @property
    def num_classes(self) -> int:
        return self.counts.shape[1]

    def label_counts(self, client: int) -> LabelCounts:
        return LabelCounts(self.counts[client], client)


@dataclass(frozen=True)
class SelectionState:
    """FIFO buffer of recently selected clients, oldest first."""

    capacity: int
    buffer: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.capacity < 0:
            raise DomainError("buffer capacity must be non-negative")
        if len(set(self.buffer)) != len(self.buffer):
            raise DomainError("buffer holds duplicate client ids")
        if len(self.buffer) > self.capacity:
            raise DomainError("buffer is over capacity")


@dataclass(frozen=True)
class SelectionResult:
    cohort: tuple[int, ...]
    cohort_entropy: float
    trace: tuple[tuple[int, float], ...] = field(default=())


def _check_cohort_size(registry: ClientRegistry, m: int) -> None:
    if m < 1:
        raise DomainError(f"cohort size must be >= 1, got {m}")
    if m > registry.num_clients:
        raise DomainError(f"cohort size {m} exceeds the {registry.num_clients} registered clients")


def _argmax_lowest_id(candidates: np.ndarray, scores: np.ndarray) -> int:
    best = scores.max()
    tied = candidates[scores >= best - TIE_TOL]
    return int(tied.min())


def _trace_result(registry: ClientRegistry, cohort: Iterable[int]) -> SelectionResult:
    cohort = tuple(int(c) for c in cohort)
    running = np.zeros(registry.num_classes)
    trace = []
    for c in cohort:
        running = running + registry.counts[c]
        trace.append((c, entropy(normalize(running))))
    return SelectionResult(cohort, trace[-1][1], tuple(trace))


def select_fedentopt(
    registry: ClientRegistry,
    m: int,
    state: SelectionState,
    rng: np.random.Generator,
    relax: bool = False,
) -> tuple[SelectionResult, SelectionState]:
    """Pick ``m`` clients whose pooled label distribution has maximal entropy.

    The first client is drawn uniformly from those outside the buffer. Each
    later pick greedily maximizes the entropy of the running label sum. Every
    pick is pushed onto the FIFO buffer, evicting the oldest entry when full.
    Availability is recomputed per pick, so a client evicted mid-round may be
    picked again in the same round (it is still excluded once picked).

    With ``relax=True``, a round that runs out of candidates evicts buffer
    entries oldest first until one becomes available, instead of raising.
    """
    _check_cohort_size(registry, m)
    k = registry.num_clients
    buffer = list(state.buffer)
    picked: list[int] = []
    picked_mask = np.zeros(k, dtype=bool)
    running = np.zeros(registry.num_classes)
    trace = []

    for pick in range(m):
        excluded = picked_mask.copy()
        excluded[buffer] = True
        available = np.flatnonzero(~excluded)
        while available.size == 0 and relax and buffer:
            buffer.pop(0)
            excluded = picked_mask.copy()
            excluded[buffer] = True
            available = np.flatnonzero(~excluded)
        if available.size == 0:
            raise InfeasibleError(
                f"no client available at pick {pick + 1} of {m} (buffer holds {len(buffer)} of {k})"
            )

        if pick == 0:
            chosen = int(available[rng.integers(available.size)])
        else:
            scores = row_entropies(running + registry.counts[available])
            chosen = _argmax_lowest_id(available, scores)

        if state.capacity > 0:
            if len(buffer) >= state.capacity:
                buffer.pop(0)
            buffer.append(chosen)
        picked.append(chosen)
        picked_mask[chosen] = True
        running = running + registry.counts[chosen]
        trace.append((chosen, entropy(normalize(running))))

    result = SelectionResult(tuple(picked), trace[-1][1], tuple(trace))
    return result, SelectionState(state.capacity, tuple(buffer))


def select_random(registry: ClientRegistry, m: int, rng: np.random.Generator) -> SelectionResult:
    """Draw ``m`` distinct clients uniformly without replacement."""
    _check_cohort_size(registry, m)
    cohort = rng.choice(registry.num_clients, size=m, replace=False)
    return _trace_result(registry, cohort)


def greedy_step_oracle(
    registry: ClientRegistry,
    picked: Iterable[int],
    excluded: Iterable[int],
    running: LabelCounts | np.ndarray,
) -> int:
    """Exhaustive reference for one greedy pick.

    Evaluates every candidate one at a time through ``normalize`` and
    ``entropy``; meant for checking ``select_fedentopt`` in tests.
    """
    blocked = set(int(c) for c in picked) | set(int(c) for c in excluded)
    base = running.counts if isinstance(running, LabelCounts) else np.asarray(running, dtype=np.float64)
    best_id, best_h = None, -np.inf
    for j in range(registry.num_clients):
        if j in blocked:
            continue
        h = entropy(normalize(base + registry.counts[j]))
        if best_id is None or h > best_h + TIE_TOL:
            best_id, best_h = j, h
    if best_id is None:
        raise InfeasibleError("no candidate outside picked and excluded clients")
    return best_id


TRACE_HEADER = ("round", "pick_index", "client_id", "entropy_bits")


def write_trace_csv(path: str | Path, rounds: Sequence[tuple[int, SelectionResult]]) -> None:
    """Write per-pick traces, one row per pick: ``round,pick_index,client_id,entropy_bits``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for t, res in rounds:
            for i, (cid, h) in enumerate(res.trace):
                w.writerow([t, i, cid, f"{h:.6f}"])
