"""Synchronous parameter-server SGD with fault injection.

Each iteration: the server broadcasts ``x``, every worker samples a batch
from its data source and returns a gradient, gradient-level faults are
applied, and only then does the server draw its scoring batch and
aggregate. All randomness comes from per-role streams keyed on the run
seed, so turning faults on or off never changes what honest workers sample.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import faults as flt
from .aggregation import AggregatorConfig, GradientSet, ScoreOracle, aggregate
from .core import (
    Dataset,
    TaskSpec,
    draw_points,
    grad_eval,
    is_finite,
    loss_eval,
    make_task,
    partition_dataset,
    predict,
    sample_batch,
)
from .faults import FaultSpec
from .rng import FAULT, INIT, SERVER, TEST, Rng, worker_stream

LR_SCHEDULES = ("constant", "inv_sqrt")
DATA_MODES = ("iid", "disjoint")


@dataclass(frozen=True)
class SimConfig:
    task: str = "quadratic"
    dimension: int = 10
    num_points: int = 2000
    task_options: dict = field(default_factory=dict)
    m: int = 20
    worker_batch: int = 100
    n_r: int = 4
    gamma: float = 0.1
    lr_schedule: str = "constant"
    T: int = 100
    aggregator: AggregatorConfig = field(default_factory=AggregatorConfig)
    rho: float = 0.0005
    beta: float | None = None
    fault: FaultSpec = field(default_factory=FaultSpec)
    data_mode: str = "iid"
    seed: int = 0
    test_points: int = 1000
    x0: tuple | None = None

    def validate(self) -> None:
        """Raise ``ValueError`` naming the first offending field."""
        checks = [
            ("T", self.T >= 1, "must be >= 1"),
            ("m", self.m >= 1, "must be >= 1"),
            ("worker_batch", self.worker_batch >= 1, "must be >= 1"),
            ("n_r", self.n_r >= 1, "must be >= 1"),
            ("gamma", self.gamma > 0, "must be > 0"),
            ("rho", self.rho >= 0, "must be >= 0"),
            ("beta", self.beta is None or self.beta >= 0, "must be >= 0"),
            ("lr_schedule", self.lr_schedule in LR_SCHEDULES, f"must be one of {LR_SCHEDULES}"),
            ("data_mode", self.data_mode in DATA_MODES, f"must be one of {DATA_MODES}"),
            ("num_points", self.num_points >= 1, "must be >= 1"),
            ("test_points", self.test_points >= 1, "must be >= 1"),
            ("seed", self.seed >= 0, "must be >= 0"),
            ("q", self.fault.active_q <= self.m, f"exceeds m={self.m}"),
        ]
        for name, ok, msg in checks:
            if not ok:
                raise ValueError(f"{name}: {msg}")
        if self.data_mode == "disjoint" and self.num_points < self.m:
            raise ValueError("num_points: disjoint mode needs at least m points")
        if self.fault.kind == "label_flip" and self.task == "quadratic":
            raise ValueError("fault: label flipping needs a classification task")
        try:
            self.aggregator.validate(self.m)
        except ValueError as exc:
            raise ValueError(f"b: {exc}") from None

    def snapshot(self) -> dict:
        return asdict(self)


@dataclass
class WorkerState:
    id: int
    data: Dataset
    faulty: bool = False


@dataclass(frozen=True)
class MetricsRecord:
    t: int
    train_loss: float
    grad_norm: float
    test_accuracy: float | None
    selected: tuple = ()
    faulty: tuple = ()
    gamma: float = 0.0
    wallclock_ns: int = 0
    diverged: bool = False


@dataclass(frozen=True)
class Trace:
    config: SimConfig
    initial: MetricsRecord
    records: tuple
    final_x: np.ndarray

    @property
    def diverged(self) -> bool:
        return bool(self.records) and self.records[-1].diverged

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)


@dataclass
class RunContext:
    """Everything a run holds besides ``x``: data, workers and rng streams."""

    cfg: SimConfig
    task: TaskSpec
    data: Dataset
    test: Dataset | None
    workers: list
    worker_rngs: list
    server_rng: Rng
    fault_rng: Rng
    diverged: bool = False
    audit: list = field(default_factory=list)

    @classmethod
    def build(cls, cfg: SimConfig, task: TaskSpec | None = None, data: Dataset | None = None):
        if task is None or data is None:
            task, data = make_task(cfg.task, cfg.dimension, cfg.num_points, cfg.seed, **cfg.task_options)
        test = draw_points(task, cfg.test_points, Rng(cfg.seed, TEST)) if task.is_classification else None
        if cfg.data_mode == "disjoint":
            sources = partition_dataset(data, cfg.m)
        else:
            sources = [data] * cfg.m
        return cls(
            cfg, task, data, test,
            workers=[WorkerState(i, sources[i]) for i in range(cfg.m)],
            worker_rngs=[Rng(cfg.seed, worker_stream(i)) for i in range(cfg.m)],
            server_rng=Rng(cfg.seed, SERVER),
            fault_rng=Rng(cfg.seed, FAULT),
        )

    def step_size(self) -> float:
        if self.cfg.lr_schedule == "inv_sqrt":
            return 1.0 / (self.task.smoothness * math.sqrt(self.cfg.T))
        return self.cfg.gamma

    def penalty(self, gamma: float) -> float:
        if self.cfg.beta is not None:
            return self.cfg.beta * gamma * gamma / 2.0
        return self.cfg.rho


def worker_step(w: WorkerState, x, cfg: SimConfig, rng: Rng, task: TaskSpec) -> np.ndarray:
    """One worker's gradient on a fresh batch, with flipped labels if it is a label-flip fault."""
    batch = sample_batch(w.data, cfg.worker_batch, rng)
    if w.faulty and cfg.fault.kind == "label_flip":
        batch = batch.with_labels(flt.flip_labels(batch.labels, task.num_classes))
    return grad_eval(task, x, batch)


def evaluate(task: TaskSpec, x, dataset: Dataset) -> tuple[float, float | None]:
    """Full-dataset loss and, for classification, top-1 accuracy."""
    loss = loss_eval(task, x, dataset)
    if not task.is_classification:
        return loss, None
    return loss, float(np.mean(predict(task, x, dataset) == dataset.labels))


def _measure(ctx: RunContext, x, t: int, **extra) -> MetricsRecord:
    loss = loss_eval(ctx.task, x, ctx.data)
    gnorm = float(np.linalg.norm(grad_eval(ctx.task, x, ctx.data)))
    acc = evaluate(ctx.task, x, ctx.test)[1] if ctx.test is not None else None
    return MetricsRecord(t, loss, gnorm, acc, **extra)


def server_step(x, cfg: SimConfig, t: int, ctx: RunContext) -> tuple[np.ndarray, MetricsRecord]:
    """Run iteration ``t`` (1-based) and return the new parameters and its metrics."""
    gamma = ctx.step_size()
    if ctx.diverged:
        return x, _measure(ctx, x, t, gamma=gamma, diverged=True)

    faulty = flt.select_faulty(cfg.m, cfg.fault.active_q, cfg.fault.selection, t, ctx.fault_rng)
    for w in ctx.workers:
        w.faulty = w.id in faulty
    grads = GradientSet(np.stack([
        worker_step(w, x, cfg, ctx.worker_rngs[w.id], ctx.task) for w in ctx.workers
    ]), faulty)
    grads = flt.inject(cfg.fault, grads, faulty, ctx.fault_rng)
    ctx.audit.append((t, "inject", ctx.fault_rng.draws, ctx.server_rng.draws))

    # the scoring batch is drawn only after every candidate is fixed
    score_batch = sample_batch(ctx.data, cfg.n_r, ctx.server_rng)
    ctx.audit.append((t, "score_batch", ctx.fault_rng.draws, ctx.server_rng.draws))
    oracle = ScoreOracle(ctx.task, score_batch, gamma, ctx.penalty(gamma))

    start = time.perf_counter_ns()
    update, selected = aggregate(cfg.aggregator, grads, x, oracle)
    elapsed = time.perf_counter_ns() - start

    x_new = x - gamma * update
    extra = dict(selected=tuple(int(i) for i in selected), faulty=tuple(sorted(faulty)),
                 gamma=gamma, wallclock_ns=elapsed)
    if not is_finite(x_new):
        ctx.diverged = True
        return x, _measure(ctx, x, t, diverged=True, **extra)
    rec = _measure(ctx, x_new, t, **extra)
    if not (math.isfinite(rec.train_loss) and math.isfinite(rec.grad_norm)):
        ctx.diverged = True
        rec = MetricsRecord(**{**asdict(rec), "diverged": True})
    return x_new, rec


def initial_point(cfg: SimConfig, dimension: int) -> np.ndarray:
    if cfg.x0 is not None:
        x0 = np.array(cfg.x0, dtype=np.float64).reshape(-1)
        if x0.shape[0] != dimension:
            raise ValueError(f"x0: expected length {dimension}, got {x0.shape[0]}")
        return x0
    return Rng(cfg.seed, INIT).uniform(-0.5, 0.5, size=dimension)


def run_experiment(cfg: SimConfig, task: TaskSpec | None = None, data: Dataset | None = None) -> Trace:
    """Run ``cfg.T`` synchronous iterations from the seeded initial point.

    ``task`` and ``data`` may be supplied to bypass task generation.
    """
    cfg.validate()
    ctx = RunContext.build(cfg, task, data)
    x = initial_point(cfg, ctx.task.dimension)
    initial = _measure(ctx, x, 0, gamma=ctx.step_size())
    records = []
    for t in range(1, cfg.T + 1):
        x, rec = server_step(x, cfg, t, ctx)
        records.append(rec)
    return Trace(cfg, initial, tuple(records), x.copy())
