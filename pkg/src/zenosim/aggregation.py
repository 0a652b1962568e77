"""Gradient aggregation rules: Mean, coordinate-wise Median, Krum and Zeno.

Zeno ranks each candidate update ``u`` by its stochastic descendant score

    score(u) = f_r(x) - f_r(x - gamma * u) - rho * ||u||^2

where ``f_r`` is the mean loss on a small batch the server draws after the
candidates arrive, and averages the ``m - b`` best-scored candidates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .core import Dataset, TaskSpec, loss_eval

RULES = ("mean", "median", "krum", "zeno")
DEFAULT_RHO = 0.0005


@dataclass(frozen=True)
class GradientSet:
    """The ``m`` candidate gradients of one iteration, stacked as an ``(m, d)`` array.

    ``truth`` optionally records which indices were actually faulty; it is
    metadata for tests and never read by the aggregation rules.
    """

    candidates: np.ndarray
    truth: frozenset | None = None

    def __post_init__(self):
        c = np.ascontiguousarray(self.candidates, dtype=np.float64)
        if c.ndim == 1:
            c = c.reshape(-1, 1) if c.size else c.reshape(0, 0)
        if c.ndim != 2 or c.shape[0] == 0:
            raise ValueError("empty gradient set")
        object.__setattr__(self, "candidates", c)
        if self.truth is not None:
            truth = frozenset(int(i) for i in self.truth)
            if len(truth) > c.shape[0] or any(not 0 <= i < c.shape[0] for i in truth):
                raise ValueError("truth indices must be a subset of [m]")
            object.__setattr__(self, "truth", truth)

    @classmethod
    def of(cls, vectors: Sequence, truth=None) -> "GradientSet":
        vectors = [np.asarray(v, dtype=np.float64).reshape(-1) for v in vectors]
        if not vectors:
            raise ValueError("empty gradient set")
        if len({v.shape[0] for v in vectors}) != 1:
            raise ValueError("all candidates must share one dimension")
        return cls(np.stack(vectors), truth)

    @property
    def m(self) -> int:
        return self.candidates.shape[0]

    @property
    def dimension(self) -> int:
        return self.candidates.shape[1]

    def __len__(self):
        return self.m

    def __getitem__(self, i) -> np.ndarray:
        return self.candidates[i]

    def correct_indices(self) -> list[int]:
        bad = self.truth or frozenset()
        return [i for i in range(self.m) if i not in bad]


@dataclass(frozen=True)
class ScoreOracle:
    """Server-side loss sample used to score every candidate of one iteration."""

    task: TaskSpec
    batch: Dataset
    gamma: float
    rho: float = DEFAULT_RHO

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be > 0")
        if self.rho < 0:
            raise ValueError("rho must be >= 0")
        if len(self.batch) == 0:
            raise ValueError("empty batch")

    @classmethod
    def from_beta(cls, task, batch, gamma: float, beta: float) -> "ScoreOracle":
        """Couple the magnitude penalty to the step size: ``rho = beta * gamma^2 / 2``."""
        return cls(task, batch, gamma, beta * gamma * gamma / 2.0)

    def loss(self, x) -> float:
        return loss_eval(self.task, x, self.batch)


@dataclass(frozen=True)
class AggregatorConfig:
    rule: str = "mean"
    b: int = 0

    def __post_init__(self):
        if self.rule not in RULES:
            raise ValueError(f"unknown aggregation rule {self.rule!r}")
        if self.b < 0:
            raise ValueError("b must be >= 0")

    def validate(self, m: int) -> None:
        if self.rule == "krum" and not 2 * self.b + 2 < m:
            raise ValueError("krum cardinality violated")
        if self.rule == "zeno" and self.b >= m:
            raise ValueError("nothing to aggregate")


def aggregate_mean(g: GradientSet) -> np.ndarray:
    return kernels.mean_rows(g.candidates, np.arange(g.m, dtype=np.intp))


def aggregate_median(g: GradientSet) -> np.ndarray:
    """Per-coordinate median; even ``m`` takes the midpoint of the middle pair."""
    return kernels.coordinate_median(g.candidates)


def krum_scores(g: GradientSet, b: int) -> np.ndarray:
    if b < 0 or not 2 * b + 2 < g.m:
        raise ValueError("krum cardinality violated")
    dist = kernels.pairwise_sq_dists(g.candidates)
    dist[np.isnan(dist)] = np.inf
    return kernels.krum_scores(dist, g.m - b - 2)


def aggregate_krum(g: GradientSet, b: int) -> tuple[np.ndarray, int]:
    """Return the candidate with the smallest summed squared distance to its
    ``m - b - 2`` nearest neighbours, and its index (lowest index on ties)."""
    k = int(np.argmin(krum_scores(g, b)))
    return g.candidates[k].copy(), k


def zeno_score(u, x, oracle: ScoreOracle) -> float:
    u = np.asarray(u, dtype=np.float64).reshape(1, -1)
    x = np.asarray(x, dtype=np.float64)
    if u.shape[1] != x.shape[0]:
        raise ValueError("dimension mismatch between update and parameters")
    fx = oracle.loss(x)
    return _score(fx, oracle.loss(x - oracle.gamma * u[0]), oracle.rho, kernels.sq_norms(u)[0])


def _score(fx, fshift, rho, sq):
    return fx - fshift - rho * sq


def zeno_scores(g: GradientSet, x, oracle: ScoreOracle) -> np.ndarray:
    """Scores for all candidates, reusing one evaluation of ``f_r(x)``."""
    x = np.asarray(x, dtype=np.float64)
    if g.dimension != x.shape[0]:
        raise ValueError("dimension mismatch between candidates and parameters")
    fx = oracle.loss(x)
    sq = kernels.sq_norms(g.candidates)
    out = np.empty(g.m)
    for i in range(g.m):
        out[i] = _score(fx, oracle.loss(x - oracle.gamma * g.candidates[i]), oracle.rho, sq[i])
    out[np.isnan(out)] = -np.inf
    return out


def rank_by_score(scores) -> np.ndarray:
    """Indices sorted by descending score; equal scores keep ascending index order."""
    return np.argsort(-np.asarray(scores), kind="stable")


def aggregate_zeno(g: GradientSet, b: int, x, oracle: ScoreOracle) -> tuple[np.ndarray, tuple[int, ...]]:
    """Average of the ``m - b`` best-scored candidates.

    Returns the aggregate and the selected indices in rank order. The mean is
    accumulated over the selected rows in ascending index order, so ``b = 0``
    reproduces :func:`aggregate_mean` bit for bit.
    """
    if b < 0:
        raise ValueError("b must be >= 0")
    if b >= g.m:
        raise ValueError("nothing to aggregate")
    ranked = rank_by_score(zeno_scores(g, x, oracle))[: g.m - b]
    rows = np.sort(ranked).astype(np.intp)
    return kernels.mean_rows(g.candidates, rows), tuple(ranked.tolist())


def aggregate(config: AggregatorConfig, g: GradientSet, x=None, oracle: ScoreOracle | None = None):
    """Dispatch on ``config.rule``. Returns ``(vector, selected indices)``."""
    config.validate(g.m)
    if config.rule == "mean":
        return aggregate_mean(g), ()
    if config.rule == "median":
        return aggregate_median(g), ()
    if config.rule == "krum":
        v, k = aggregate_krum(g, config.b)
        return v, (k,)
    if oracle is None or x is None:
        raise ValueError("zeno needs the current parameters and a score oracle")
    return aggregate_zeno(g, config.b, x, oracle)
