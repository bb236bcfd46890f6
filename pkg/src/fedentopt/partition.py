"""Label-skewed partitioning of a pooled dataset across clients.

Two regimes are supported: quantity-based skew, where every client holds
exactly ``j`` labels, and Dirichlet skew, where each class is spread over the
clients according to proportions drawn from ``Dir_K(beta)``.

Each class uses its own RNG stream ``(seed, "partition", 0, class)`` so results
do not depend on the order classes are processed in. The quantity regime's
class-to-client assignment uses ``(seed, "partition", 1, 0)``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DomainError, EmptyClassError, FormatError, InfeasibleError
from .labelstats import LabelCounts
from .rng import make_rng


@dataclass(frozen=True)
class PartitionSpec:
    kind: str  # "quantity" | "dirichlet"
    num_clients: int
    seed: int = 0
    j: int | None = None
    beta: float | None = None

    def __post_init__(self) -> None:
        if self.num_clients < 1:
            raise DomainError("num_clients must be >= 1")
        if self.kind == "quantity":
            if self.j is None or self.j < 1:
                raise DomainError("quantity partition needs j >= 1")
        elif self.kind == "dirichlet":
            if self.beta is None or not self.beta > 0:
                raise DomainError("dirichlet partition needs beta > 0")
        else:
            raise DomainError(f"unknown partition kind {self.kind!r}")


@dataclass(frozen=True)
class Partition:
    """Per-client lists of indices into the pooled dataset."""

    assignment: tuple[tuple[int, ...], ...]

    @property
    def num_clients(self) -> int:
        return len(self.assignment)

    def sizes(self) -> list[int]:
        return [len(a) for a in self.assignment]

    def client_indices(self, client: int) -> np.ndarray:
        return np.asarray(self.assignment[client], dtype=np.int64)

    def validate(self, num_samples: int) -> None:
        """Raise if the assignment is not disjoint, exhaustive and free of empty clients."""
        if any(len(a) == 0 for a in self.assignment):
            raise InfeasibleError("partition has an empty client")
        flat = np.concatenate([np.asarray(a, dtype=np.int64) for a in self.assignment])
        if flat.size != num_samples or not np.array_equal(np.sort(flat), np.arange(num_samples)):
            raise InfeasibleError("partition is not a disjoint cover of the pooled samples")


def _class_members(labels: np.ndarray, num_classes: int) -> list[np.ndarray]:
    members = []
    for c in range(num_classes):
        idx = np.flatnonzero(labels == c)
        if idx.size == 0:
            raise EmptyClassError(f"class {c} has no samples")
        members.append(idx)
    return members


def _check_labels(labels: Sequence[int], num_classes: int) -> np.ndarray:
    arr = np.asarray(labels, dtype=np.int64)
    if arr.ndim != 1:
        raise DomainError("labels must be a 1-D sequence")
    if arr.size and (arr.min() < 0 or arr.max() >= num_classes):
        raise DomainError(f"labels must lie in 0..{num_classes - 1}")
    return arr


def assign_quantity_classes(num_classes: int, num_clients: int, j: int, seed: int) -> list[list[int]]:
    """Give each client ``j`` distinct classes, covering every class.

    Clients are visited in a shuffled order and draw classes from a stream of
    successive class permutations, so all classes appear once before any is
    repeated. A class that would duplicate one the client already holds is
    deferred to the next client.
    """
    if not 1 <= j <= num_classes:
        raise DomainError(f"j must lie in 1..{num_classes}, got {j}")
    if j * num_clients < num_classes:
        raise InfeasibleError(f"{num_clients} clients x {j} labels cannot cover {num_classes} classes")
    rng = make_rng(seed, "partition", 1, 0)
    order = rng.permutation(num_clients)
    pending: deque[int] = deque()
    held: list[list[int]] = [[] for _ in range(num_clients)]
    for client in order:
        mine = held[client]
        deferred = []
        while len(mine) < j:
            if not pending:
                pending.extend(int(c) for c in rng.permutation(num_classes))
            c = pending.popleft()
            if c in mine:
                deferred.append(c)
            else:
                mine.append(c)
        pending.extendleft(reversed(deferred))
    return [sorted(h) for h in held]


def partition_quantity(
    labels: Sequence[int], num_classes: int, num_clients: int, j: int, seed: int = 0
) -> Partition:
    """Quantity-based label skew: every client holds samples of exactly ``j`` labels.

    Samples of a class are shuffled and split evenly among the clients holding
    it; the remainder goes one sample per client, lowest client id first.
    """
    arr = _check_labels(labels, num_classes)
    if j * num_clients < num_classes:
        raise InfeasibleError(f"{num_clients} clients x {j} labels cannot cover {num_classes} classes")
    members = _class_members(arr, num_classes)
    held = assign_quantity_classes(num_classes, num_clients, j, seed)

    holders: list[list[int]] = [[] for _ in range(num_classes)]
    for client, classes in enumerate(held):
        for c in classes:
            holders[c].append(client)

    out: list[list[int]] = [[] for _ in range(num_clients)]
    for c in range(num_classes):
        owners = holders[c]
        n = members[c].size
        if n < len(owners):
            raise InfeasibleError(f"class {c} has {n} samples for {len(owners)} holding clients")
        shuffled = make_rng(seed, "partition", 0, c).permutation(members[c])
        base, extra = divmod(n, len(owners))
        start = 0
        for rank, client in enumerate(owners):
            take = base + (1 if rank < extra else 0)
            out[client].extend(int(i) for i in shuffled[start : start + take])
            start += take
    return Partition(tuple(tuple(a) for a in out))


def largest_remainder(proportions: np.ndarray, total: int) -> np.ndarray:
    """Round ``proportions * total`` to integers that sum to ``total`` exactly.

    Leftover units go to the largest fractional parts; ties favour lower indices.
    """
    p = np.asarray(proportions, dtype=np.float64)
    raw = p / p.sum() * total
    base = np.floor(raw).astype(np.int64)
    short = total - int(base.sum())
    if short > 0:
        rem = raw - base
        order = np.argsort(-rem, kind="stable")
        base[order[:short]] += 1
    return base


def dirichlet_proportions(num_clients: int, beta: float, rng: np.random.Generator) -> np.ndarray:
    """One Dirichlet(beta) draw built from normalized Gamma(beta, 1) variates."""
    g = rng.gamma(beta, 1.0, size=num_clients)
    s = g.sum()
    if not s > 0:
        # all gamma draws underflowed (tiny beta): put the whole class on one client
        g = np.zeros(num_clients)
        g[int(rng.integers(num_clients))] = 1.0
        s = 1.0
    return g / s


def partition_dirichlet(
    labels: Sequence[int], num_classes: int, num_clients: int, beta: float, seed: int = 0
) -> Partition:
    """Dirichlet label skew: class ``c`` is split by ``p_c ~ Dir_K(beta)``.

    Clients left empty afterwards receive one sample at a time from the
    currently largest client.
    """
    if not beta > 0:
        raise DomainError(f"beta must be positive, got {beta}")
    arr = _check_labels(labels, num_classes)
    members = _class_members(arr, num_classes)
    if arr.size < num_clients:
        raise InfeasibleError(f"{arr.size} samples cannot fill {num_clients} clients")

    out: list[list[int]] = [[] for _ in range(num_clients)]
    for c in range(num_classes):
        rng = make_rng(seed, "partition", 0, c)
        props = dirichlet_proportions(num_clients, beta, rng)
        alloc = largest_remainder(props, members[c].size)
        shuffled = rng.permutation(members[c])
        bounds = np.concatenate([[0], np.cumsum(alloc)])
        for k in range(num_clients):
            out[k].extend(int(i) for i in shuffled[bounds[k] : bounds[k + 1]])

    while True:
        sizes = [len(a) for a in out]
        empty = [k for k, s in enumerate(sizes) if s == 0]
        if not empty:
            break
        donor = int(np.argmax(sizes))
        out[empty[0]].append(out[donor].pop())
    return Partition(tuple(tuple(a) for a in out))


def make_partition(labels: Sequence[int], num_classes: int, spec: PartitionSpec) -> Partition:
    if spec.kind == "quantity":
        return partition_quantity(labels, num_classes, spec.num_clients, spec.j, spec.seed)
    return partition_dirichlet(labels, num_classes, spec.num_clients, spec.beta, spec.seed)


def counts_from_partition(partition: Partition, labels: Sequence[int], num_classes: int) -> list[LabelCounts]:
    arr = np.asarray(labels, dtype=np.int64)
    return [
        LabelCounts(np.bincount(arr[partition.client_indices(k)], minlength=num_classes).astype(np.float64), k)
        for k in range(partition.num_clients)
    ]


def write_partition(partition: Partition, path: str | Path) -> None:
    """Write one ``client_id<TAB>i,j,k`` line per client."""
    lines = [f"{k}\t{','.join(str(i) for i in idx)}\n" for k, idx in enumerate(partition.assignment)]
    Path(path).write_text("".join(lines))


def read_partition(path: str | Path) -> Partition:
    rows: dict[int, tuple[int, ...]] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            cid, _, rest = line.partition("\t")
            rows[int(cid)] = tuple(int(i) for i in rest.split(",")) if rest else ()
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: malformed partition line") from exc
    if sorted(rows) != list(range(len(rows))):
        raise FormatError(f"{path}: client ids must be 0..K-1")
    return Partition(tuple(rows[k] for k in range(len(rows))))
