"""Experiment configuration and its dotted-key text format.

A config file holds one ``section.key = value`` line per setting. Values are
JSON literals: double-quoted strings, ``true``/``false``, numbers, arrays and
``null`` for an unset optional. Lines starting with ``#`` are comments. Keys
that are absent take their defaults.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, get_type_hints

from ..errors import DomainError, FormatError
from ..fedcore import ModelSpec, TrainConfig
from ..partition import PartitionSpec


@dataclass(frozen=True)
class SyntheticConfig:
    classes: int = 10
    dims: int = 20
    per_class: int = 200
    separation: float = 4.0


@dataclass(frozen=True)
class DatasetConfig:
    kind: str = "synthetic"  # "synthetic" | "cifar10"
    path: str | None = None
    synthetic: SyntheticConfig = field(default_factory=SyntheticConfig)


@dataclass(frozen=True)
class PartitionConfig:
    kind: str = "quantity"  # "quantity" | "dirichlet"
    j: int = 2
    beta: float = 0.1


@dataclass(frozen=True)
class ClientsConfig:
    k: int = 100


@dataclass(frozen=True)
class SelectConfig:
    strategy: str = "fedentopt"  # "fedentopt" | "random"
    m: int | None = None
    rate: float | None = 0.1
    q_fraction: float = 0.7


@dataclass(frozen=True)
class DPConfig:
    enabled: bool = False
    epsilon: float = 0.5


@dataclass(frozen=True)
class TrainSection:
    epochs: int = 5
    batch: int = 64
    lr: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 5e-4
    lr_decay: float = 0.98
    rounds: int = 100


@dataclass(frozen=True)
class ModelConfig:
    kind: str = "mlp"  # "mlp" | "softmax"
    hidden: int = 32


@dataclass(frozen=True)
class RunConfig:
    seeds: tuple[int, ...] = (1, 2, 3)
    outdir: str = "runs"


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    partition: PartitionConfig = field(default_factory=PartitionConfig)
    clients: ClientsConfig = field(default_factory=ClientsConfig)
    select: SelectConfig = field(default_factory=SelectConfig)
    dp: DPConfig = field(default_factory=DPConfig)
    train: TrainSection = field(default_factory=TrainSection)
    model: ModelConfig = field(default_factory=ModelConfig)
    run: RunConfig = field(default_factory=RunConfig)

    # ------------------------------------------------------------------ derived

    @property
    def num_clients(self) -> int:
        return self.clients.k

    @property
    def cohort_size(self) -> int:
        """``select.m`` if given, else ``max(1, round_half_up(rate * K))``."""
        if self.select.m is not None:
            return self.select.m
        if self.select.rate is None:
            raise DomainError("one of select.m or select.rate must be set")
        return max(1, math.floor(self.select.rate * self.clients.k + 0.5))

    @property
    def buffer_capacity(self) -> int:
        # small slack so that e.g. 0.29 * 100 resolves to 29, not 28
        return math.floor(self.select.q_fraction * self.clients.k + 1e-9)

    @property
    def num_classes(self) -> int:
        return self.dataset.synthetic.classes if self.dataset.kind == "synthetic" else 10

    def train_config(self) -> TrainConfig:
        t = self.train
        return TrainConfig(t.epochs, t.batch, t.lr, t.momentum, t.weight_decay, t.lr_decay, t.rounds)

    def partition_spec(self, seed: int) -> PartitionSpec:
        p = self.partition
        if p.kind == "quantity":
            return PartitionSpec("quantity", self.clients.k, seed, j=p.j)
        return PartitionSpec(p.kind, self.clients.k, seed, beta=p.beta)

    def model_spec(self, input_dim: int) -> ModelSpec:
        return ModelSpec(self.model.kind, input_dim, self.num_classes, self.model.hidden if self.model.kind == "mlp" else 0)

    def validate(self) -> "ExperimentConfig":
        if self.dataset.kind not in ("synthetic", "cifar10"):
            raise DomainError(f"dataset.kind must be synthetic or cifar10, got {self.dataset.kind!r}")
        if self.dataset.kind == "cifar10" and not self.dataset.path:
            raise DomainError("dataset.path is required for cifar10")
        if self.select.strategy not in ("fedentopt", "random"):
            raise DomainError(f"select.strategy must be fedentopt or random, got {self.select.strategy!r}")
        if self.clients.k < 1:
            raise DomainError("clients.k must be >= 1")
        m = self.cohort_size
        if not 1 <= m <= self.clients.k:
            raise DomainError(f"cohort size {m} must lie in 1..{self.clients.k}")
        if not 0 <= self.select.q_fraction <= 1:
            raise DomainError("select.q_fraction must lie in [0, 1]")
        if self.select.strategy == "fedentopt" and self.buffer_capacity > self.clients.k - m:
            raise DomainError(
                f"buffer capacity {self.buffer_capacity} exceeds K - M = {self.clients.k - m}; selection would starve"
            )
        if self.dp.enabled and not self.dp.epsilon > 0:
            raise DomainError("dp.epsilon must be positive")
        if not self.run.seeds:
            raise DomainError("run.seeds must not be empty")
        self.partition_spec(self.run.seeds[0])
        self.train_config()
        self.model_spec(1)
        return self


# ---------------------------------------------------------------- flat keys


def _leaf_types(cls: type, prefix: str = "") -> dict[str, Any]:
    out: dict[str, Any] = {}
    hints = get_type_hints(cls)
    for f in dataclasses.fields(cls):
        tp = hints[f.name]
        key = f"{prefix}{f.name}"
        if dataclasses.is_dataclass(tp):
            out.update(_leaf_types(tp, key + "."))
        else:
            out[key] = tp
    return out


CONFIG_KEYS: dict[str, Any] = _leaf_types(ExperimentConfig)


def to_flat(config: ExperimentConfig) -> dict[str, Any]:
    out: dict[str, Any] = {}

    def walk(obj: Any, prefix: str) -> None:
        for f in dataclasses.fields(obj):
            v = getattr(obj, f.name)
            if dataclasses.is_dataclass(v):
                walk(v, f"{prefix}{f.name}.")
            else:
                out[f"{prefix}{f.name}"] = v

    walk(config, "")
    return out


def _coerce(key: str, value: Any) -> Any:
    tp = CONFIG_KEYS[key]
    if value is None:
        return None
    text = str(tp)
    if "tuple" in text:
        if isinstance(value, str):
            value = [v for v in value.replace(" ", "").split(",") if v]
        return tuple(int(v) for v in value)
    if tp is bool:
        if isinstance(value, str):
            if value.lower() in ("1", "true", "yes", "on"):
                return True
            if value.lower() in ("0", "false", "no", "off"):
                return False
            raise FormatError(f"{key}: cannot read {value!r} as a boolean")
        return bool(value)
    if "int" in text and "float" not in text:
        if isinstance(value, str) and value.lower() in ("none", "null", ""):
            return None
        if isinstance(value, float) and not value.is_integer():
            raise FormatError(f"{key}: expected an integer, got {value!r}")
        return int(value)
    if "float" in text:
        if isinstance(value, str) and value.lower() in ("none", "null", ""):
            return None
        return float(value)
    return str(value)


def from_flat(values: dict[str, Any], base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Build a config from dotted keys, starting from ``base`` (or the defaults)."""
    unknown = sorted(set(values) - set(CONFIG_KEYS))
    if unknown:
        raise FormatError(f"unknown config keys: {', '.join(unknown)}")
    flat = to_flat(base or ExperimentConfig())
    for k, v in values.items():
        try:
            flat[k] = _coerce(k, v)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, FormatError):
                raise
            raise FormatError(f"{k}: cannot use value {v!r}") from exc

    def build(cls: type, prefix: str) -> Any:
        hints = get_type_hints(cls)
        kwargs = {}
        for f in dataclasses.fields(cls):
            tp = hints[f.name]
            key = f"{prefix}{f.name}"
            kwargs[f.name] = build(tp, key + ".") if dataclasses.is_dataclass(tp) else flat[key]
        return cls(**kwargs)

    return build(ExperimentConfig, "")


def dumps(config: ExperimentConfig) -> str:
    lines = []
    for key, value in to_flat(config).items():
        if isinstance(value, tuple):
            value = list(value)
        lines.append(f"{key} = {json.dumps(value)}")
    return "\n".join(lines) + "\n"


def loads(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    values: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, rest = line.partition("=")
        if not sep:
            raise FormatError(f"line {lineno}: expected 'key = value'")
        key = key.strip()
        try:
            values[key] = json.loads(rest.strip())
        except json.JSONDecodeError as exc:
            raise FormatError(f"line {lineno}: cannot parse value for {key}") from exc
    return from_flat(values, base)


def load(path: str | Path) -> ExperimentConfig:
    return loads(Path(path).read_text())


def dump(config: ExperimentConfig, path: str | Path) -> None:
    Path(path).write_text(dumps(config))
