"""Federated training core: datasets, models, local SGD, aggregation, evaluation."""

from .data import Dataset, gen_synthetic, load_cifar10_bin, load_cifar10_dir, stratified_split, write_dataset_csv
from .model import ModelSpec, forward_loss_grad, init_params, logits
from .train import (
    RoundMetrics,
    TrainConfig,
    aggregate_params,
    evaluate,
    local_train,
    per_class_recall,
    sgd_step,
    shuffle_rng,
)

__all__ = [
    "Dataset",
    "ModelSpec",
    "RoundMetrics",
    "TrainConfig",
    "aggregate_params",
    "evaluate",
    "forward_loss_grad",
    "gen_synthetic",
    "init_params",
    "load_cifar10_bin",
    "load_cifar10_dir",
    "local_train",
    "logits",
    "per_class_recall",
    "sgd_step",
    "shuffle_rng",
    "stratified_split",
    "write_dataset_csv",
]
