"""Round loop, multi-seed experiments, selection traces and sweeps.

RNG streams are keyed ``(seed, purpose, round, client)``:

=========  =========================================
purpose    use
=========  =========================================
data       synthetic sample generation
split      synthetic train/test hold-out
partition  client partitioning (one stream per class)
dp         Laplace noise, one stream per client
init       global model initialization
select     cohort selection, one stream per round
shuffle    local mini-batch order per (round, client)
=========  =========================================
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import DomainError, FedEntOptError
from ..fedcore import (
    Dataset,
    ModelSpec,
    RoundMetrics,
    TrainConfig,
    aggregate_params,
    evaluate,
    gen_synthetic,
    init_params,
    load_cifar10_dir,
    load_cifar10_bin,
    local_train,
    shuffle_rng,
    stratified_split,
)
from ..labelstats import entropy, normalize
from ..partition import Partition, counts_from_partition, make_partition
from ..privacy import PrivacyBudget, privatize_counts
from ..rng import make_rng
from ..selection import (
    ClientRegistry,
    SelectionResult,
    SelectionState,
    select_fedentopt,
    select_random,
    write_trace_csv,
)
from . import config as cfgmod
from .config import ExperimentConfig

log = logging.getLogger(__name__)

METRICS_HEADER = (
    "round",
    "selector",
    "cohort",
    "entropy_bits",
    "entropy_true_bits",
    "test_accuracy",
    "test_loss",
    "lr",
)
SUMMARY_WINDOW = 10
# synthetic runs hold out per_class // 4 extra samples of every class for testing
SYNTHETIC_TEST_RATIO = 4


def load_data(config: ExperimentConfig, seed: int) -> tuple[Dataset, Dataset]:
    """Return ``(train, test)`` for one seed."""
    ds = config.dataset
    if ds.kind == "cifar10":
        path = Path(ds.path)
        if path.is_dir():
            return load_cifar10_dir(path)
        full = load_cifar10_bin(path)
        return stratified_split(full, max(1, int(np.bincount(full.labels).min()) // 6), seed)
    syn = ds.synthetic
    n_test = max(1, syn.per_class // SYNTHETIC_TEST_RATIO)
    full = gen_synthetic(syn.classes, syn.dims, syn.per_class + n_test, syn.separation, seed)
    return stratified_split(full, n_test, seed)


@dataclass
class Population:
    """Everything fixed before the first round: data, partition and the server's registry."""

    train: Dataset
    test: Dataset
    partition: Partition
    clients: list[Dataset]
    true_registry: ClientRegistry
    registry: ClientRegistry


def build_population(config: ExperimentConfig, seed: int, labels_only: bool = False) -> Population:
    train, test = load_data(config, seed)
    part = make_partition(train.labels, train.num_classes, config.partition_spec(seed))
    part.validate(len(train))
    counts = counts_from_partition(part, train.labels, train.num_classes)
    sizes = part.sizes()
    true_registry = ClientRegistry.from_label_counts(counts, sizes)
    if config.dp.enabled:
        budget = PrivacyBudget(config.dp.epsilon)
        noised = [privatize_counts(c, budget, make_rng(seed, "dp", 0, k)) for k, c in enumerate(counts)]
        registry = ClientRegistry.from_label_counts(noised, sizes)
    else:
        registry = true_registry
    # local datasets keep pooled order; a single client holding everything sees the pooled set
    clients = [] if labels_only else [train.subset(np.sort(part.client_indices(k))) for k in range(part.num_clients)]
    return Population(train, test, part, clients, true_registry, registry)


@dataclass
class RunState:
    config: ExperimentConfig
    seed: int
    population: Population
    model: ModelSpec
    train_cfg: TrainConfig
    params: np.ndarray
    selection: SelectionState
    metrics: list[RoundMetrics] = field(default_factory=list)


def init_run(config: ExperimentConfig, seed: int) -> RunState:
    config.validate()
    pop = build_population(config, seed)
    model = config.model_spec(pop.train.dim)
    params = init_params(model, make_rng(seed, "init"))
    state = SelectionState(config.buffer_capacity if config.select.strategy == "fedentopt" else 0)
    return RunState(config, seed, pop, model, config.train_config(), params, state)


def select_cohort(
    strategy: str, registry: ClientRegistry, m: int, state: SelectionState, rng: np.random.Generator
) -> tuple[SelectionResult, SelectionState]:
    if strategy == "fedentopt":
        return select_fedentopt(registry, m, state, rng)
    return select_random(registry, m, rng), state


def cohort_entropy(registry: ClientRegistry, cohort: Sequence[int]) -> float:
    return entropy(normalize(registry.counts[list(cohort)].sum(axis=0)))


def run_round(state: RunState, t: int) -> RoundMetrics:
    """Select, train the cohort locally, aggregate by true dataset size, evaluate."""
    cfg = state.config
    pop = state.population
    try:
        result, state.selection = select_cohort(
            cfg.select.strategy, pop.registry, cfg.cohort_size, state.selection, make_rng(state.seed, "select", t)
        )
        lr = state.train_cfg.round_lr(t)
        updates = []
        for cid in result.cohort:
            local = local_train(
                state.model,
                state.params,
                pop.clients[cid],
                state.train_cfg,
                lr,
                shuffle_rng(state.seed, t, cid),
                context=f"seed {state.seed} round {t} client {cid}",
            )
            updates.append((cid, local, len(pop.clients[cid])))
        state.params = aggregate_params(updates)
    except FedEntOptError as exc:
        raise type(exc)(f"round {t}: {exc}") from exc
    acc, loss = evaluate(state.model, state.params, pop.test)
    row = RoundMetrics(
        round=t,
        selector=cfg.select.strategy,
        cohort=result.cohort,
        entropy_bits=result.cohort_entropy,
        entropy_true_bits=cohort_entropy(pop.true_registry, result.cohort),
        test_accuracy=acc,
        test_loss=loss,
        lr=lr,
    )
    state.metrics.append(row)
    return row


def run_seed(config: ExperimentConfig, seed: int) -> list[RoundMetrics]:
    state = init_run(config, seed)
    for t in range(config.train.rounds):
        row = run_round(state, t)
        if t % 10 == 0 or t == config.train.rounds - 1:
            log.info("seed %d round %d acc %.4f entropy %.3f", seed, t, row.test_accuracy, row.entropy_bits)
    return state.metrics


def format_metrics_row(m: RoundMetrics) -> list[str]:
    return [
        str(m.round),
        m.selector,
        ";".join(str(c) for c in m.cohort),
        f"{m.entropy_bits:.6f}",
        f"{m.entropy_true_bits:.6f}",
        f"{m.test_accuracy:.6f}",
        f"{m.test_loss:.6f}",
        f"{m.lr:.6f}",
    ]


def write_metrics_csv(path: str | Path, rows: Sequence[RoundMetrics]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRICS_HEADER)
        for m in rows:
            w.writerow(format_metrics_row(m))


def read_metrics_csv(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def last_window_mean(accuracies: Sequence[float], window: int = SUMMARY_WINDOW) -> float:
    """Mean accuracy over the last ``window`` rounds (all rounds if fewer)."""
    tail = list(accuracies)[-window:]
    return float(np.mean(tail))


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    rounds: dict[int, list[RoundMetrics]]
    seed_scores: dict[int, float]
    mean_accuracy: float
    std_accuracy: float
    files: list[Path] = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "selector": self.config.select.strategy,
            "dp": self.config.dp.enabled,
            "epsilon": self.config.dp.epsilon if self.config.dp.enabled else None,
            "cohort_size": self.config.cohort_size,
            "buffer_capacity": self.config.buffer_capacity if self.config.select.strategy == "fedentopt" else 0,
            "window": SUMMARY_WINDOW,
            "seeds": {str(s): round(v, 6) for s, v in self.seed_scores.items()},
            "mean_accuracy": round(self.mean_accuracy, 6),
            "std_accuracy": round(self.std_accuracy, 6),
        }


def summarize(rounds: dict[int, list[RoundMetrics]]) -> tuple[dict[int, float], float, float]:
    scores = {s: last_window_mean([m.test_accuracy for m in rows]) for s, rows in rounds.items()}
    vals = np.array(list(scores.values()))
    return scores, float(vals.mean()), float(vals.std())


def run_experiment(config: ExperimentConfig, write: bool = True) -> ExperimentReport:
    """Run every seed; write ``metrics_seed<s>.csv`` per seed and ``summary.json``."""
    config.validate()
    rounds = {seed: run_seed(config, seed) for seed in config.run.seeds}
    scores, mean, std = summarize(rounds)
    report = ExperimentReport(config, rounds, scores, mean, std)
    if write:
        out = Path(config.run.outdir)
        try:
            out.mkdir(parents=True, exist_ok=True)
            for seed, rows in rounds.items():
                path = out / f"metrics_seed{seed}.csv"
                write_metrics_csv(path, rows)
                report.files.append(path)
            summary = out / "summary.json"
            summary.write_text(json.dumps(report.summary(), indent=2) + "\n")
            report.files.append(summary)
            cfgmod.dump(config, out / "config.cfg")
        except OSError as exc:
            raise OSError(f"cannot write results under {out}: {exc}") from exc
    return report


@dataclass
class TraceReport:
    seed: int
    fedentopt: list[SelectionResult]
    random: list[SelectionResult]

    def entropies(self, selector: str) -> np.ndarray:
        return np.array([r.cohort_entropy for r in getattr(self, selector)])


def select_trace(config: ExperimentConfig, rounds: int | None = None, write: bool = True) -> list[TraceReport]:
    """Run only the selection loop, for both strategies on the same registry.

    Writes per-pick traces ``trace_<selector>_seed<s>.csv`` and a per-round
    comparison ``entropy_rounds_seed<s>.csv`` for each seed.
    """
    config.validate()
    rounds = config.train.rounds if rounds is None else rounds
    m = config.cohort_size
    if config.buffer_capacity > config.num_clients - m:
        raise DomainError(f"buffer capacity {config.buffer_capacity} exceeds K - M = {config.num_clients - m}")
    reports = []
    for seed in config.run.seeds:
        pop = build_population(config, seed, labels_only=True)
        state = SelectionState(config.buffer_capacity)
        ent, rnd = [], []
        for t in range(rounds):
            res, state = select_fedentopt(pop.registry, m, state, make_rng(seed, "select", t))
            ent.append(res)
            rnd.append(select_random(pop.registry, m, make_rng(seed, "select", t)))
        reports.append(TraceReport(seed, ent, rnd))
        if write:
            out = Path(config.run.outdir)
            out.mkdir(parents=True, exist_ok=True)
            write_trace_csv(out / f"trace_fedentopt_seed{seed}.csv", list(enumerate(ent)))
            write_trace_csv(out / f"trace_random_seed{seed}.csv", list(enumerate(rnd)))
            with open(out / f"entropy_rounds_seed{seed}.csv", "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["round", "fedentopt_bits", "random_bits"])
                for t, (a, b) in enumerate(zip(ent, rnd)):
                    w.writerow([t, f"{a.cohort_entropy:.6f}", f"{b.cohort_entropy:.6f}"])
    return reports


SWEEP_HEADER = ("selector", "rate", "m", "dp", "epsilon", "mean_accuracy", "std_accuracy", "outdir")


def sweep(
    config: ExperimentConfig,
    rates: Sequence[float] | None = None,
    epsilons: Sequence[float | None] | None = None,
    selectors: Sequence[str] | None = None,
) -> list[dict]:
    """Grid over participation rates, DP budgets (``None`` = DP off) and selectors.

    Each cell runs a full experiment in ``<outdir>/<selector>_r<rate>_<dp>``;
    ``sweep.csv`` collects the summaries.
    """
    rates = list(rates) if rates else [config.select.rate if config.select.m is None else None]
    epsilons = list(epsilons) if epsilons else [config.dp.epsilon if config.dp.enabled else None]
    selectors = list(selectors) if selectors else [config.select.strategy]
    base = Path(config.run.outdir)
    rows = []
    for selector in selectors:
        for rate in rates:
            for eps in epsilons:
                tag = f"{selector}_r{rate if rate is not None else 'm' + str(config.select.m)}_{'dp' + str(eps) if eps is not None else 'nodp'}"
                cell = dataclasses.replace(
                    config,
                    select=dataclasses.replace(
                        config.select,
                        strategy=selector,
                        rate=rate if rate is not None else config.select.rate,
                        m=None if rate is not None else config.select.m,
                    ),
                    dp=dataclasses.replace(config.dp, enabled=eps is not None, epsilon=eps if eps is not None else config.dp.epsilon),
                    run=dataclasses.replace(config.run, outdir=str(base / tag)),
                )
                rep = run_experiment(cell)
                rows.append(
                    {
                        "selector": selector,
                        "rate": "" if rate is None else f"{rate:g}",
                        "m": cell.cohort_size,
                        "dp": str(eps is not None).lower(),
                        "epsilon": "" if eps is None else f"{eps:g}",
                        "mean_accuracy": f"{rep.mean_accuracy:.6f}",
                        "std_accuracy": f"{rep.std_accuracy:.6f}",
                        "outdir": tag,
                    }
                )
    base.mkdir(parents=True, exist_ok=True)
    with open(base / "sweep.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_HEADER, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return rows
