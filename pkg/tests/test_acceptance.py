"""Acceptance criteria, one test each; a PASS/FAIL line per criterion is
printed in the terminal summary."""

import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from oracles import krum_bruteforce, median_bruteforce, zeno_bruteforce
from zenosim.aggregation import (
    AggregatorConfig,
    GradientSet,
    ScoreOracle,
    aggregate_krum,
    aggregate_mean,
    aggregate_median,
    aggregate_zeno,
    zeno_scores,
)
from zenosim.core import grad_eval, make_task, sample_batch
from zenosim.faults import FaultSpec
from zenosim.rng import Rng
from zenosim.simulator import SimConfig, run_experiment
from zenosim.timing import emit_timing, loglog_slope

pytestmark = pytest.mark.acceptance

REPEATS = 5
M = 20
BASELINES = {"mean": AggregatorConfig("mean"), "median": AggregatorConfig("median"),
             "krum": AggregatorConfig("krum", 8)}


def report(name, ok, detail):
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, detail


def logistic_cfg(aggregator, seed, **kw):
    base = dict(task="logistic", dimension=10, num_points=2000, m=M, worker_batch=100, n_r=4,
                gamma=0.1, rho=0.0005, T=500, aggregator=aggregator, seed=seed)
    base.update(kw)
    return SimConfig(**base)


def mean_over_repeats(make_cfg, metric):
    vals = [getattr(run_experiment(make_cfg(seed)).records[-1], metric) for seed in range(REPEATS)]
    return float(np.mean(vals))


def test_c1_fault_free_parity():
    start = time.perf_counter()
    zeno = mean_over_repeats(lambda s: logistic_cfg(AggregatorConfig("zeno", 4), s), "train_loss")
    mean = mean_over_repeats(lambda s: logistic_cfg(AggregatorConfig("mean"), s), "train_loss")
    elapsed = time.perf_counter() - start
    rel = abs(zeno - mean) / mean
    report("C1 fault-free parity", rel <= 0.10 and elapsed < 30,
           f"zeno {zeno:.5f} vs mean {mean:.5f} (rel {rel:.4f} <= 0.10), {elapsed:.1f}s < 30s")


def test_c2_majority_bit_flip():
    start = time.perf_counter()

    def run(agg):
        return run_experiment(SimConfig(
            task="quadratic", dimension=10, num_points=2000, task_options={"noise": 0.0},
            m=M, worker_batch=100, T=300, aggregator=agg, fault=FaultSpec("bit_flip", 12)))

    zeno = run(AggregatorConfig("zeno", 12))
    zeno_ratio = zeno.records[-1].grad_norm / zeno.initial.grad_norm
    ascents = {k: run(a) for k, a in BASELINES.items()}
    elapsed = time.perf_counter() - start
    stuck = {k: tr.records[-1].train_loss >= tr.initial.train_loss for k, tr in ascents.items() if k != "krum"}
    krum_ratio = ascents["krum"].records[-1].grad_norm / ascents["krum"].initial.grad_norm
    ok = zeno_ratio <= 1e-3 and all(stuck.values()) and krum_ratio > 1e-3 and elapsed < 10
    report("C2 majority bit-flip", ok,
           f"zeno grad ratio {zeno_ratio:.2e} <= 1e-3; mean/median non-convergent {stuck}; "
           f"krum(b=8) ratio {krum_ratio:.2e} > 1e-3; {elapsed:.1f}s < 10s")


@pytest.fixture(scope="module")
def label_flip_baselines():
    start = time.perf_counter()
    acc = {k: mean_over_repeats(lambda s, a=a: logistic_cfg(a, s, fault=FaultSpec("label_flip", 12)),
                                "test_accuracy")
           for k, a in BASELINES.items()}
    return acc, time.perf_counter() - start


def label_flip_zeno(n_r):
    return mean_over_repeats(
        lambda s: logistic_cfg(AggregatorConfig("zeno", 12), s, n_r=n_r, fault=FaultSpec("label_flip", 12)),
        "test_accuracy")


def test_c3_majority_label_flip(label_flip_baselines):
    base, base_time = label_flip_baselines
    start = time.perf_counter()
    zeno = label_flip_zeno(4)
    elapsed = base_time + time.perf_counter() - start
    margins = {k: zeno - v for k, v in base.items()}
    report("C3 majority label-flip", min(margins.values()) >= 0.10 and elapsed < 60,
           f"zeno acc {zeno:.3f}; margins {{{', '.join(f'{k}: {v:.3f}' for k, v in margins.items())}}} >= 0.10; "
           f"{elapsed:.1f}s < 60s")


def test_c4_disjoint_data():
    start = time.perf_counter()

    def losses(agg):
        runs = [run_experiment(logistic_cfg(agg, s, gamma=0.05, data_mode="disjoint",
                                            fault=FaultSpec("label_flip", 12))) for s in range(REPEATS)]
        return (float(np.mean([r.initial.train_loss for r in runs])),
                float(np.mean([r.records[-1].train_loss for r in runs])))

    z0, z = losses(AggregatorConfig("zeno", 12))
    finals = {k: losses(a)[1] for k, a in BASELINES.items()}
    elapsed = time.perf_counter() - start
    ok = z <= 0.8 * z0 and all(v >= z for v in finals.values()) and elapsed < 60
    report("C4 disjoint-data convergence", ok,
           f"zeno loss {z0:.4f} -> {z:.4f} (<= 0.8x); baselines "
           f"{{{', '.join(f'{k}: {v:.3f}' for k, v in finals.items())}}} >= zeno; {elapsed:.1f}s < 60s")


def _random_instance(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(2, 11))
    d = int(rng.integers(1, 6))
    q = int(rng.integers(0, m))
    task, data = make_task("quadratic", d, 50, seed % 97, curvature=(0.3, 2.0))
    x = rng.uniform(-1, 1, size=d)
    r = Rng(seed, 60)
    honest = [grad_eval(task, x, sample_batch(data, 5, r)) for _ in range(m - q)]
    faulty = [rng.normal(scale=float(rng.choice([0.1, 1, 10])), size=d) for _ in range(q)]
    cands = np.array(honest + faulty)
    perm = rng.permutation(m)
    truth = {int(np.flatnonzero(perm == i)[0]) for i in range(m - q, m)}
    oracle = ScoreOracle(task, sample_batch(data, int(rng.integers(1, 5)), r),
                         float(rng.uniform(0.01, 1.0)), float(rng.uniform(0, 0.05)))
    return GradientSet(cands[perm], truth), x, oracle


def test_c5_bounded_score_ordering():
    failures = 0
    for seed in range(1000):
        g, x, oracle = _random_instance(seed)
        scores = zeno_scores(g, x, oracle)
        overall = np.sort(scores)[::-1]
        correct = np.sort(scores[g.correct_indices()])[::-1]
        failures += int(np.any(overall[: len(correct)] < correct))
    report("C5 bounded-score ordering", failures == 0, f"{failures} failures in 1000 instances")


def test_c6_descent_inequality():
    beta, failures, worst, checked = 1.0, 0, -np.inf, 0
    for q in range(6):
        cfg = SimConfig(task="quadratic", dimension=5, num_points=100,
                        task_options={"noise": 0.0, "curvature": (0.5, 2.0)},
                        m=12, worker_batch=10, n_r=4, gamma=0.25, beta=beta, T=200,
                        aggregator=AggregatorConfig("zeno", q), fault=FaultSpec("bit_flip", q), seed=q)
        trace = run_experiment(cfg)
        L = 2.0
        assert cfg.gamma <= 1 / L
        prev = trace.initial
        for rec in trace.records:
            g2 = prev.grad_norm ** 2
            bound = -(cfg.gamma / 2) * g2 + ((L + beta) * cfg.gamma ** 2 / 2) * g2
            slack = (rec.train_loss - prev.train_loss) - bound
            worst = max(worst, slack)
            failures += int(slack > 1e-12)
            checked += 1
            prev = rec
    report("C6 descent inequality (V=0)", failures == 0,
           f"{failures} violations over {checked} iterations; max slack {worst:.3e} <= 1e-12")


def test_c7_oracle_equivalence():
    krum_bad = zeno_bad = 0
    vec_err = 0.0
    for seed in range(1000):
        rng = np.random.default_rng(seed)
        m, d = int(rng.integers(3, 11)), int(rng.integers(1, 6))
        c = rng.normal(size=(m, d)) * rng.choice([0.1, 1.0, 10.0])
        g = GradientSet(c)
        b = int(rng.integers(0, (m - 3) // 2 + 1))
        krum_bad += int(aggregate_krum(g, b)[1] != krum_bruteforce(c, b))
        vec_err = max(vec_err, float(np.max(np.abs(aggregate_median(g) - median_bruteforce(c)))))
        vec_err = max(vec_err, float(np.max(np.abs(aggregate_mean(g) - c.mean(axis=0)))))

        task, data = make_task("quadratic", d, 30, seed % 53, curvature=(0.5, 1.5))
        x = rng.uniform(-1, 1, size=d)
        oracle = ScoreOracle(task, sample_batch(data, 3, Rng(seed, 61)),
                             float(rng.uniform(0.01, 0.5)), float(rng.uniform(0, 0.01)))
        zb = int(rng.integers(0, m))
        v, sel = aggregate_zeno(g, zb, x, oracle)
        want_sel, want_avg, _ = zeno_bruteforce(c, zb, x, task, oracle.batch, oracle.gamma, oracle.rho)
        zeno_bad += int(set(sel) != want_sel)
        vec_err = max(vec_err, float(np.max(np.abs(v - np.array(want_avg)))))
    ok = krum_bad == 0 and zeno_bad == 0 and vec_err <= 1e-12
    report("C7 oracle equivalence", ok,
           f"krum index mismatches {krum_bad}, zeno selection mismatches {zeno_bad}, "
           f"max vector diff {vec_err:.2e} <= 1e-12")


def test_c8_zeno_b0_is_mean():
    mismatches = 0
    for seed in range(1000):
        g, x, oracle = _random_instance(seed)
        mismatches += int(not np.array_equal(aggregate_zeno(g, 0, x, oracle)[0], aggregate_mean(g)))
    report("C8 zeno(b=0) == mean", mismatches == 0, f"{mismatches} bitwise mismatches in 1000 sets")


@pytest.mark.timing
def test_c9_complexity_separation():
    ms = [10, 20, 40, 80]
    rows = emit_timing(ms, 10_000, rules=("zeno", "krum"))
    slope = {rule: loglog_slope(ms, [r.median_ns for r in rows if r.rule == rule]) for rule in ("zeno", "krum")}
    ok = 0.7 <= slope["zeno"] <= 1.4 and 1.6 <= slope["krum"] <= 2.4
    report("C9 complexity separation", ok,
           f"zeno slope {slope['zeno']:.3f} in [0.7, 1.4]; krum slope {slope['krum']:.3f} in [1.6, 2.4]")


def test_c10_zeno_batch_size_robustness(label_flip_baselines):
    base, _ = label_flip_baselines
    worst = {}
    for n_r in (1, 4, 16):
        zeno = label_flip_zeno(n_r)
        worst[n_r] = min(zeno - v for v in base.values())
    report("C10 n_r robustness", all(w >= 0.10 for w in worst.values()),
           f"smallest margin per n_r {{{', '.join(f'{k}: {v:.3f}' for k, v in worst.items())}}} >= 0.10")
