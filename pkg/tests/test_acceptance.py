"""Acceptance criteria, one test each, with a PASS/FAIL line per criterion in the summary."""

import time

import numpy as np
import pytest
from scipy import stats

from conftest import ACCEPTANCE_LINES
from fedentopt.fedcore import forward_loss_grad, init_params
from fedentopt.fedcore.model import ModelSpec
from fedentopt.harness import config as cfgmod
from fedentopt.harness.cli import main as cli_main
from fedentopt.harness.runner import init_run, load_data, run_experiment, run_round, select_trace
from fedentopt.labelstats import LabelCounts, all_labels_present_threshold
from fedentopt.partition import PartitionSpec, counts_from_partition, make_partition
from fedentopt.privacy import PrivacyBudget, privatize_counts
from fedentopt.rng import make_rng
from fedentopt.selection import ClientRegistry, SelectionState, greedy_step_oracle, select_fedentopt

ENTROPY_BAR = 3.17
THRESHOLD = max(ENTROPY_BAR, all_labels_present_threshold(10))

DESK = {
    "dataset.synthetic.classes": 10,
    "dataset.synthetic.dims": 20,
    "dataset.synthetic.per_class": 200,
    "dataset.synthetic.separation": 4.0,
    "clients.k": 100,
    "partition.kind": "quantity",
    "partition.j": 2,
    "select.m": 10,
    "select.q_fraction": 0.7,
    "model.kind": "mlp",
    "model.hidden": 32,
    "train.rounds": 100,
    "run.seeds": [1, 2, 3],
}


def record(number, name, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] {number:>2}. {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert passed, line


def desk_config(tmp_path, **over):
    values = dict(DESK, **{"run.outdir": str(tmp_path)})
    values.update(over)
    return cfgmod.from_flat(values)


# ---------------------------------------------------------------- 1 and 2


@pytest.fixture(scope="module")
def traces(tmp_path_factory):
    start = time.perf_counter()
    reports = select_trace(desk_config(tmp_path_factory.mktemp("trace")), rounds=100)
    return reports, time.perf_counter() - start


def test_01_entropy_threshold(traces):
    reports, elapsed = traces
    parts, ok = [], elapsed < 10
    for rep in reports:
        ent, rnd = rep.entropies("fedentopt").mean(), rep.entropies("random").mean()
        ok &= ent > THRESHOLD and rnd < ent
        parts.append(f"seed {rep.seed} {ent:.4f} vs random {rnd:.4f}")
    record(1, "entropy threshold > 3.17 bits", ok, "; ".join(parts) + f"; {elapsed:.2f}s")


def test_02_entropy_variance_below_random(traces):
    reports, _ = traces
    parts, ok = [], True
    for rep in reports:
        s_ent, s_rnd = rep.entropies("fedentopt").std(), rep.entropies("random").std()
        ok &= s_ent < s_rnd
        parts.append(f"seed {rep.seed} std {s_ent:.4f} vs {s_rnd:.4f}")
    record(2, "per-round entropy std below random", ok, "; ".join(parts))


# ---------------------------------------------------------------- 3


def test_03_greedy_oracle_equivalence():
    start = time.perf_counter()
    r = np.random.default_rng(31337)
    instances = mismatches = picks = 0
    while instances < 1000:
        k, c = int(r.integers(2, 21)), int(r.integers(2, 9))
        counts = r.integers(0, 8, size=(k, c)).astype(float) * (r.random((k, c)) < 0.6)
        counts[counts.sum(axis=1) == 0, int(r.integers(c))] = 1.0
        reg = ClientRegistry(counts)
        m = int(r.integers(1, k + 1))
        q = int(r.integers(0, k - m + 1))
        state = SelectionState(q, tuple(int(x) for x in r.permutation(k)[: int(r.integers(0, q + 1))]))
        res, _ = select_fedentopt(reg, m, state, np.random.default_rng(instances))
        buffer, running = list(state.buffer), np.zeros(c)
        for i, cid in enumerate(res.cohort):
            if i:
                picks += 1
                mismatches += greedy_step_oracle(reg, res.cohort[:i], buffer, running) != cid
            if q:
                if len(buffer) >= q:
                    buffer.pop(0)
                buffer.append(cid)
            running = running + counts[cid]
        instances += 1
    elapsed = time.perf_counter() - start
    record(
        3, "greedy oracle equivalence", mismatches == 0 and elapsed < 30,
        f"{instances} registries, {picks} greedy picks, {mismatches} mismatches, {elapsed:.2f}s",
    )


# ---------------------------------------------------------------- 4


def fd_grad(spec, params, x, y, h=1e-5):
    g = np.zeros_like(params)
    for i in range(params.size):
        e = np.zeros_like(params)
        e[i] = h
        g[i] = (forward_loss_grad(spec, params + e, x, y)[0] - forward_loss_grad(spec, params - e, x, y)[0]) / (2 * h)
    return g


def test_04_gradient_check():
    start = time.perf_counter()
    r = np.random.default_rng(4)
    worst = {"softmax": 0.0, "mlp": 0.0}
    for kind in worst:
        for _ in range(50):
            d, c = int(r.integers(2, 7)), int(r.integers(2, 6))
            spec = ModelSpec(kind, d, c, hidden=int(r.integers(2, 10)) if kind == "mlp" else 0)
            params = r.normal(0, 0.5, spec.num_params)
            n = int(r.integers(1, 9))
            x, y = r.normal(size=(n, d)), r.integers(0, c, size=n)
            _, g = forward_loss_grad(spec, params, x, y)
            worst[kind] = max(worst[kind], float(np.max(np.abs(g - fd_grad(spec, params, x, y)))))
    elapsed = time.perf_counter() - start
    ok = max(worst.values()) < 1e-6 and elapsed < 10
    record(4, "gradient vs central differences", ok, f"max abs error {worst}, {elapsed:.2f}s")


# ---------------------------------------------------------------- 5


def centralized_sgd(cfg, seed, rounds):
    """Plain SGD on the pooled training set: one epoch per round, same RNG streams."""
    train, _ = load_data(cfg, seed)
    spec = cfg.model_spec(train.dim)
    tc = cfg.train_config()
    params = init_params(spec, make_rng(seed, "init"))
    history = []
    for t in range(rounds):
        lr = tc.lr * tc.lr_decay**t
        order = make_rng(seed, "shuffle", t, 0).permutation(len(train))
        velocity = np.zeros_like(params)
        for s in range(0, len(train), tc.batch_size):
            idx = order[s : s + tc.batch_size]
            _, g = forward_loss_grad(spec, params, train.features[idx], train.labels[idx])
            velocity = velocity * tc.momentum + (g + tc.weight_decay * params)
            params = params - lr * velocity
        history.append(params)
    return history


def test_05_fedavg_degenerate_equivalence(tmp_path):
    start = time.perf_counter()
    cfg = desk_config(
        tmp_path,
        **{
            "clients.k": 1, "select.m": 1, "select.strategy": "random", "partition.j": 10,
            "train.epochs": 1, "train.rounds": 20, "run.seeds": [3],
        },
    )
    state = init_run(cfg, 3)
    reference = centralized_sgd(cfg, 3, 20)
    identical = 0
    for t in range(20):
        run_round(state, t)
        identical += bool(np.array_equal(state.params, reference[t]))
    elapsed = time.perf_counter() - start
    record(5, "single-client FedAvg == centralized SGD", identical == 20 and elapsed < 10,
           f"{identical}/20 rounds bit-identical, {elapsed:.2f}s")


# ---------------------------------------------------------------- 6 and 7


@pytest.fixture(scope="module")
def desk_runs(tmp_path_factory):
    """Paired accuracy runs; seeds grow to five only if the strict three-seed check fails."""
    base = tmp_path_factory.mktemp("desk")
    cache = {}

    def scores(selector, dp, seeds):
        key = (selector, dp)
        have = cache.setdefault(key, {})
        missing = [s for s in seeds if s not in have]
        if missing:
            cfg = desk_config(
                base / f"{selector}_{dp}",
                **{"select.strategy": selector, "dp.enabled": dp, "dp.epsilon": 0.5, "run.seeds": missing},
            )
            have.update(run_experiment(cfg, write=False).seed_scores)
        return np.array([have[s] for s in seeds])

    start = time.perf_counter()
    seeds = [1, 2, 3]
    gap = 100 * (scores("fedentopt", False, seeds) - scores("random", False, seeds))
    strict = bool(np.all(gap >= 3.0))
    if not strict:
        seeds = [1, 2, 3, 4, 5]
        gap = 100 * (scores("fedentopt", False, seeds) - scores("random", False, seeds))
    return {"scores": scores, "seeds": seeds, "gap": gap, "strict": strict, "elapsed": time.perf_counter() - start}


def test_06_end_to_end_ordering(desk_runs):
    gap, seeds = desk_runs["gap"], desk_runs["seeds"]
    if desk_runs["strict"]:
        ok, rule = True, ">= 3 points on each of 3 seeds"
    else:
        ok = gap.mean() > 0 and np.sum(gap > 0) > len(gap) / 2
        rule = "fallback: 5 seeds, mean gap > 0, majority positive"
    ok &= desk_runs["elapsed"] < 600
    record(
        6, "FedEntOpt beats random FedAvg", ok,
        f"{rule}; gaps (points) {dict(zip(seeds, np.round(gap, 2).tolist()))}, mean {gap.mean():.2f}, "
        f"{desk_runs['elapsed']:.1f}s",
    )


def test_07_dp_robustness(desk_runs):
    start = time.perf_counter()
    seeds, scores = desk_runs["seeds"], desk_runs["scores"]
    plain = scores("fedentopt", False, seeds).mean()
    private = scores("fedentopt", True, seeds).mean()
    rnd = scores("random", False, seeds).mean()
    elapsed = time.perf_counter() - start
    ok = abs(private - plain) * 100 <= 1.0 and private > rnd and elapsed < 600
    record(
        7, "DP (epsilon 0.5) robustness", ok,
        f"seeds {seeds}: DP {100 * private:.2f} vs non-DP {100 * plain:.2f} vs random {100 * rnd:.2f}, {elapsed:.1f}s",
    )


# ---------------------------------------------------------------- 8


def test_08_laplace_statistics():
    start = time.perf_counter()
    counts = LabelCounts(np.full(10, 40.0))
    r = np.random.default_rng(8)
    noise = np.concatenate(
        [privatize_counts(counts, PrivacyBudget(0.5), r, clamp=False) - counts.counts for _ in range(10_000)]
    )
    pvalue = stats.kstest(noise, stats.laplace(scale=2.0).cdf).pvalue
    var_err = abs(noise.var() - 8.0) / 8.0
    elapsed = time.perf_counter() - start
    ok = noise.size == 100_000 and pvalue > 0.01 and var_err <= 0.025 and elapsed < 5
    record(8, "Laplace(2) noise fit", ok, f"KS p={pvalue:.3f}, variance error {100 * var_err:.2f}%, {elapsed:.2f}s")


# ---------------------------------------------------------------- 9


def test_09_partition_contracts():
    start = time.perf_counter()
    r = np.random.default_rng(9)
    checked = 0
    for _ in range(200):
        c = int(r.integers(2, 11))
        k = int(r.integers(1, 60))
        per_class = int(r.integers(k, k + 50))
        labels = r.permutation(np.repeat(np.arange(c), per_class))
        kind = ["quantity", "dirichlet"][checked % 2]
        j = int(r.integers(max(1, -(-c // k)), c + 1))
        spec = PartitionSpec(kind, k, int(r.integers(2**63)), j=j, beta=float(r.choice([0.1, 0.5, 1.0, 10.0])))
        part = make_partition(labels, c, spec)
        flat = np.sort(np.concatenate([np.asarray(a, dtype=int) for a in part.assignment]))
        assert np.array_equal(flat, np.arange(labels.size)), "not disjoint-exhaustive"
        assert all(len(a) for a in part.assignment), "empty client"
        counts = np.stack([x.counts for x in counts_from_partition(part, labels, c)])
        assert np.array_equal(counts.sum(axis=0), np.bincount(labels, minlength=c)), "class totals changed"
        if kind == "quantity":
            assert np.all(np.count_nonzero(counts, axis=1) == j), "wrong label count per client"
        checked += 1
    elapsed = time.perf_counter() - start
    record(9, "partition contracts", elapsed < 10, f"{checked} partitions checked, {elapsed:.2f}s")


# ---------------------------------------------------------------- 10


def test_10_reproducible_train(tmp_path):
    flags = [f"--{k}={','.join(map(str, v)) if isinstance(v, list) else v}" for k, v in DESK.items() if k != "run.seeds"]
    outputs = []
    for name in ("first", "second"):
        out = tmp_path / name
        assert cli_main(["train", *flags, "--run.seeds", "1", "--run.outdir", str(out)]) == 0
        outputs.append((out / "metrics_seed1.csv").read_bytes())
    same = outputs[0] == outputs[1]
    record(10, "byte-identical train reruns", same, f"{len(outputs[0])} bytes, identical={same}")
