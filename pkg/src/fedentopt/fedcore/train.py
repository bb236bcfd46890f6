"""Local SGD, FedAvg aggregation and evaluation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import DimensionError, DomainError, NumericalError
from ..rng import make_rng
from .data import Dataset
from .model import ModelSpec, forward_loss_grad, logits


@dataclass(frozen=True)
class TrainConfig:
    local_epochs: int = 5
    batch_size: int = 64
    lr: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 5e-4
    lr_decay: float = 0.98
    rounds: int = 100

    def __post_init__(self) -> None:
        if self.local_epochs < 1 or self.batch_size < 1 or self.rounds < 1:
            raise DomainError("epochs, batch size and rounds must be positive")
        if self.lr < 0 or self.momentum < 0 or self.weight_decay < 0:
            raise DomainError("lr, momentum and weight decay must be non-negative")
        if not 0 < self.lr_decay <= 1:
            raise DomainError("lr_decay must lie in (0, 1]")

    def round_lr(self, t: int) -> float:
        """Step size used in round ``t`` (0-based)."""
        return self.lr * self.lr_decay**t


@dataclass(frozen=True)
class RoundMetrics:
    round: int
    selector: str
    cohort: tuple[int, ...]
    entropy_bits: float
    entropy_true_bits: float
    test_accuracy: float
    test_loss: float
    lr: float


def sgd_step(params: np.ndarray, grad: np.ndarray, velocity: np.ndarray, lr: float, momentum: float, weight_decay: float) -> None:
    """In-place SGD with momentum and L2 weight decay (decay added to the gradient)."""
    d_p = grad + weight_decay * params if weight_decay else grad
    velocity *= momentum
    velocity += d_p
    params -= lr * velocity


def epoch_batches(n: int, batch_size: int, rng: np.random.Generator) -> list[np.ndarray]:
    order = rng.permutation(n)
    return [order[i : i + batch_size] for i in range(0, n, batch_size)]


def local_train(
    spec: ModelSpec,
    global_params: np.ndarray,
    dataset: Dataset,
    cfg: TrainConfig,
    round_lr: float,
    rng: np.random.Generator,
    context: str = "",
) -> np.ndarray:
    """Run ``cfg.local_epochs`` epochs of mini-batch SGD starting from ``global_params``.

    Momentum starts at zero on every call. Batches come from a fresh shuffle
    each epoch; the last partial batch is kept.
    """
    n = len(dataset)
    if n == 0:
        raise DomainError("local dataset is empty")
    params = global_params.copy()
    velocity = np.zeros_like(params)
    for epoch in range(cfg.local_epochs):
        for b, idx in enumerate(epoch_batches(n, cfg.batch_size, rng)):
            _, grad = forward_loss_grad(
                spec, params, dataset.features[idx], dataset.labels[idx], f"{context} epoch {epoch} batch {b}"
            )
            sgd_step(params, grad, velocity, round_lr, cfg.momentum, cfg.weight_decay)
        if not np.all(np.isfinite(params)):
            raise NumericalError(f"parameters diverged ({context} epoch {epoch})")
    return params


def shuffle_rng(seed: int, round_: int, client: int) -> np.random.Generator:
    return make_rng(seed, "shuffle", round_, client)


def aggregate_params(updates: Sequence[tuple[int, np.ndarray, int]]) -> np.ndarray:
    """Dataset-size-weighted mean of ``(client_id, params, n_samples)`` updates.

    Summation runs in ascending client id so the result does not depend on
    the order updates arrive in.
    """
    if not updates:
        raise DomainError("nothing to aggregate")
    ordered = sorted(updates, key=lambda u: u[0])
    size = ordered[0][1].shape
    total = float(sum(n for _, _, n in ordered))
    if not total > 0:
        raise DomainError("aggregation weights must have positive total")
    out = np.zeros(size)
    for cid, params, n in ordered:
        if params.shape != size:
            raise DimensionError(f"client {cid} sent {params.shape} parameters, expected {size}")
        out += (n / total) * params
    return out


def evaluate(spec: ModelSpec, params: np.ndarray, test: Dataset) -> tuple[float, float]:
    """Accuracy (argmax, ties to the lowest class) and mean cross-entropy."""
    if len(test) == 0:
        raise DomainError("test set is empty")
    z = logits(spec, params, test.features)
    shifted = z - z.max(axis=1, keepdims=True)
    logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    rows = np.arange(len(test))
    acc = float(np.mean(np.argmax(z, axis=1) == test.labels))
    loss = -float(logp[rows, test.labels].mean())
    return acc, loss


def per_class_recall(spec: ModelSpec, params: np.ndarray, test: Dataset) -> np.ndarray:
    pred = np.argmax(logits(spec, params, test.features), axis=1)
    recall = np.full(test.num_classes, np.nan)
    for c in range(test.num_classes):
        mask = test.labels == c
        if mask.any():
            recall[c] = float(np.mean(pred[mask] == c))
    return recall
