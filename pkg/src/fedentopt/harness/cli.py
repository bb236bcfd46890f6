"""Command-line entry point: ``partition``, ``select-trace``, ``train`` and ``sweep``.

Every config key is also a flag (``--train.rounds 20``); flags override values
read from ``--config``.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path


from ..errors import FedEntOptError
from ..labelstats import all_labels_present_threshold
from ..partition import write_partition
from . import config as cfgmod
from .runner import build_population, run_experiment, select_trace, sweep


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="dotted-key config file")
    group = p.add_argument_group("config keys")
    for key in cfgmod.CONFIG_KEYS:
        group.add_argument(f"--{key}", dest=f"cfg:{key}", metavar="VALUE")


def _resolve_config(args: argparse.Namespace) -> cfgmod.ExperimentConfig:
    base = cfgmod.load(args.config) if args.config else cfgmod.ExperimentConfig()
    overrides = {
        k[4:]: v for k, v in vars(args).items() if k.startswith("cfg:") and v is not None
    }
    return cfgmod.from_flat(overrides, base).validate()


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v]


def cmd_partition(cfg: cfgmod.ExperimentConfig, args: argparse.Namespace) -> None:
    out = Path(cfg.run.outdir)
    out.mkdir(parents=True, exist_ok=True)
    for seed in cfg.run.seeds:
        pop = build_population(cfg, seed, labels_only=True)
        write_partition(pop.partition, out / f"partition_seed{seed}.tsv")
        files = [("counts", pop.true_registry)]
        if cfg.dp.enabled:
            files.append(("counts_dp", pop.registry))
        for name, reg in files:
            with open(out / f"{name}_seed{seed}.csv", "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["client_id"] + [f"c{i}" for i in range(reg.num_classes)])
                for k, row in enumerate(reg.counts):
                    w.writerow([k] + [f"{v:.6f}" if cfg.dp.enabled and name == "counts_dp" else str(int(v)) for v in row])
        print(f"seed {seed}: {pop.partition.num_clients} clients, sizes {min(pop.partition.sizes())}..{max(pop.partition.sizes())}")


def cmd_select_trace(cfg: cfgmod.ExperimentConfig, args: argparse.Namespace) -> None:
    reports = select_trace(cfg, args.rounds)
    threshold = all_labels_present_threshold(cfg.num_classes)
    print(f"all-labels threshold log2(C-1) = {threshold:.4f} bits")
    for rep in reports:
        for sel in ("fedentopt", "random"):
            h = rep.entropies(sel)
            print(f"seed {rep.seed} {sel:9s} mean {h.mean():.4f} std {h.std():.4f} bits")


def cmd_train(cfg: cfgmod.ExperimentConfig, args: argparse.Namespace) -> None:
    report = run_experiment(cfg)
    print(json.dumps(report.summary(), indent=2))


def cmd_sweep(cfg: cfgmod.ExperimentConfig, args: argparse.Namespace) -> None:
    epsilons = None
    if args.epsilons:
        epsilons = [None if v.strip().lower() in ("none", "off") else float(v) for v in args.epsilons.split(",")]
    rows = sweep(
        cfg,
        rates=_floats(args.rates) if args.rates else None,
        epsilons=epsilons,
        selectors=args.selectors.split(",") if args.selectors else None,
    )
    for r in rows:
        print(f"{r['selector']:9s} rate={r['rate'] or '-':5s} m={r['m']:<3} dp={r['dp']:5s} eps={r['epsilon'] or '-':4s} "
              f"acc {r['mean_accuracy']} +- {r['std_accuracy']}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedentopt", description="Entropy-based client selection simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("partition", help="write partition and label-count files")
    _add_config_flags(p)
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("select-trace", help="selection-only entropy traces for both selectors")
    _add_config_flags(p)
    p.add_argument("--rounds", type=int, default=None, help="rounds to trace (default: train.rounds)")
    p.set_defaults(func=cmd_select_trace)

    p = sub.add_parser("train", help="run one experiment over all seeds")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="grid over participation rate, epsilon and selector")
    _add_config_flags(p)
    p.add_argument("--rates", help="comma-separated participation rates")
    p.add_argument("--epsilons", help="comma-separated epsilons; 'none' runs without DP")
    p.add_argument("--selectors", help="comma-separated selectors (fedentopt,random)")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = _resolve_config(args)
        args.func(cfg, args)
    except (FedEntOptError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
