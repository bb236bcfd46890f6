"""Small differentiable classifiers over a flat parameter vector.

Two kinds are supported: softmax regression (``W: C x d``, ``b: C``) and a
one-hidden-layer ReLU MLP (``W1: h x d``, ``b1: h``, ``W2: C x h``, ``b2: C``).
Parameters are stored as one flat float64 vector; ``ModelSpec.layout`` maps
named segments to their offsets and shapes.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ..errors import DimensionError, DomainError, NumericalError
from .data import Dataset


@dataclass(frozen=True)
class Segment:
    name: str
    offset: int
    shape: tuple[int, ...]

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))


@dataclass(frozen=True)
class ModelSpec:
    kind: str  # "softmax" | "mlp"
    input_dim: int
    num_classes: int
    hidden: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ("softmax", "mlp"):
            raise DomainError(f"unknown model kind {self.kind!r}")
        if self.input_dim < 1 or self.num_classes < 2:
            raise DomainError("need input_dim >= 1 and num_classes >= 2")
        if self.kind == "mlp" and self.hidden < 1:
            raise DomainError("mlp needs a positive hidden width")

    @cached_property
    def layout(self) -> tuple[Segment, ...]:
        d, c, h = self.input_dim, self.num_classes, self.hidden
        shapes = [("W", (c, d)), ("b", (c,))] if self.kind == "softmax" else [
            ("W1", (h, d)), ("b1", (h,)), ("W2", (c, h)), ("b2", (c,))
        ]
        segs, off = [], 0
        for name, shape in shapes:
            segs.append(Segment(name, off, shape))
            off += int(np.prod(shape))
        return tuple(segs)

    @property
    def num_params(self) -> int:
        last = self.layout[-1]
        return last.offset + last.size

    def unpack(self, params: np.ndarray) -> dict[str, np.ndarray]:
        """Views of ``params`` reshaped per segment (no copy)."""
        if params.shape != (self.num_params,):
            raise DimensionError(f"expected {self.num_params} parameters, got shape {params.shape}")
        return {s.name: params[s.offset : s.offset + s.size].reshape(s.shape) for s in self.layout}

    def zeros(self) -> np.ndarray:
        return np.zeros(self.num_params)


def init_params(spec: ModelSpec, rng: np.random.Generator) -> np.ndarray:
    """Glorot-uniform weights, zero biases."""
    params = spec.zeros()
    views = spec.unpack(params)
    for seg in spec.layout:
        if len(seg.shape) == 2:
            fan_out, fan_in = seg.shape
            a = np.sqrt(6.0 / (fan_in + fan_out))
            views[seg.name][...] = rng.uniform(-a, a, size=seg.shape)
    return params


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def logits(spec: ModelSpec, params: np.ndarray, x: np.ndarray) -> np.ndarray:
    p = spec.unpack(params)
    if spec.kind == "softmax":
        return x @ p["W"].T + p["b"]
    hidden = np.maximum(x @ p["W1"].T + p["b1"], 0.0)
    return hidden @ p["W2"].T + p["b2"]


def forward_loss_grad(
    spec: ModelSpec, params: np.ndarray, x: np.ndarray, y: np.ndarray, context: str = ""
) -> tuple[float, np.ndarray]:
    """Mean natural-log cross-entropy over the batch and its gradient.

    Weight decay is not included; it is applied by the optimizer.
    """
    n = x.shape[0]
    if n == 0:
        raise DomainError("batch must be non-empty")
    if x.shape[1] != spec.input_dim:
        raise DimensionError(f"batch has {x.shape[1]} features, model expects {spec.input_dim}")
    p = spec.unpack(params)
    grad = np.zeros_like(params)
    g = spec.unpack(grad)
    rows = np.arange(n)

    with np.errstate(over="ignore", invalid="ignore"):
        if spec.kind == "softmax":
            z = x @ p["W"].T + p["b"]
        else:
            pre = x @ p["W1"].T + p["b1"]
            hidden = np.maximum(pre, 0.0)
            z = hidden @ p["W2"].T + p["b2"]

        logp = _log_softmax(z)
        loss = -float(logp[rows, y].mean())
        dz = np.exp(logp)
        dz[rows, y] -= 1.0
        dz /= n

        if spec.kind == "softmax":
            g["W"][...] = dz.T @ x
            g["b"][...] = dz.sum(axis=0)
        else:
            g["W2"][...] = dz.T @ hidden
            g["b2"][...] = dz.sum(axis=0)
            dh = (dz @ p["W2"]) * (pre > 0)
            g["W1"][...] = dh.T @ x
            g["b1"][...] = dh.sum(axis=0)

    if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
        raise NumericalError(f"non-finite loss or gradient{' (' + context + ')' if context else ''}")
    return loss, grad


def batch_loss_grad(spec: ModelSpec, params: np.ndarray, batch: Dataset, context: str = "") -> tuple[float, np.ndarray]:
    return forward_loss_grad(spec, params, batch.features, batch.labels, context)
