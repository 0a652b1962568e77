"""Wall-clock cost of one aggregation call as the number of workers grows."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .aggregation import RULES, AggregatorConfig, GradientSet, ScoreOracle, aggregate
from .core import make_task, sample_batch
from .rng import Rng

MIN_ITERATIONS = 100


@dataclass(frozen=True)
class TimingRow:
    rule: str
    m: int
    d: int
    b: int
    iterations: int
    median_ns: float
    mean_ns: float


def _legal_b(rule: str, b: int, m: int) -> int:
    if rule == "krum":
        return max(0, min(b, (m - 3) // 2))
    if rule == "zeno":
        return min(b, m - 1)
    return 0


def time_rule(rule: str, m: int, d: int, *, b: int = 0, n_r: int = 4, gamma: float = 0.1,
              rho: float = 0.0005, iterations: int = MIN_ITERATIONS, seed: int = 0,
              warmup: int = 3) -> TimingRow:
    """Median time of ``aggregate`` for one rule on random candidates."""
    task, data = make_task("quadratic", d, 64, seed, noise=1.0)
    rng = Rng(seed, 77)
    x = rng.uniform(-0.5, 0.5, size=d)
    g = GradientSet(rng.normal(size=(m, d)))
    oracle = ScoreOracle(task, sample_batch(data, n_r, rng), gamma, rho)
    b = _legal_b(rule, b, m)
    config = AggregatorConfig(rule, b)
    for _ in range(warmup):
        aggregate(config, g, x, oracle)
    samples = np.empty(iterations)
    for i in range(iterations):
        start = time.perf_counter_ns()
        aggregate(config, g, x, oracle)
        samples[i] = time.perf_counter_ns() - start
    return TimingRow(rule, m, d, b, iterations, float(np.median(samples)), float(samples.mean()))


def emit_timing(ms, d: int, *, rules=RULES, b: int = 0, n_r: int = 4, iterations: int = MIN_ITERATIONS,
                seed: int = 0) -> list[TimingRow]:
    if iterations < MIN_ITERATIONS:
        raise ValueError(f"iterations: need at least {MIN_ITERATIONS}")
    return [time_rule(rule, m, d, b=b, n_r=n_r, iterations=iterations, seed=seed)
            for rule in rules for m in ms]


def loglog_slope(xs, ys) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])
