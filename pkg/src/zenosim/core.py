"""Vectors, synthetic tasks and data handling.

Parameter vectors and gradient candidates are plain 1-D ``float64`` numpy
arrays. Three desk-scale task families are provided, each with exact loss
and gradient routines:

``quadratic``
    ``f(x; z) = 1/2 (x - x*)^T A (x - x*) + <xi_z, x - x*>`` with diagonal
    ``A`` and per-point noise vectors ``xi_z`` centred over the dataset, so
    the full-data objective is exactly ``1/2 (x - x*)^T A (x - x*)``. The
    point's features hold ``xi_z``.
``logistic``
    Binary logistic regression (no bias) on two Gaussian blobs placed
    symmetrically about the origin, labels ``{0, 1}``.
``mlp``
    One tanh hidden layer and a softmax output over ``C`` Gaussian blobs.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

from .rng import DATA, ESTIMATE, Rng

TASK_KINDS = ("quadratic", "logistic", "mlp")
MAX_HIDDEN = 16
ESTIMATE_SAMPLES = 10_000


def as_vector(values, dimension: int | None = None) -> np.ndarray:
    """Copy ``values`` into a fresh 1-D float64 parameter vector."""
    v = np.array(values, dtype=np.float64).reshape(-1)
    if dimension is not None and v.shape[0] != dimension:
        raise ValueError(f"dimension mismatch: expected {dimension}, got {v.shape[0]}")
    return v


def is_finite(v) -> bool:
    return bool(np.all(np.isfinite(v)))


class DataPoint(NamedTuple):
    features: np.ndarray
    label: float


@dataclass(frozen=True)
class Dataset:
    """Column-stored points: ``features`` is ``(n, p)``, ``labels`` is ``(n,)``.

    ``num_classes`` is 0 for regression data.
    """

    features: np.ndarray
    labels: np.ndarray
    num_classes: int = 0

    def __post_init__(self):
        if self.features.ndim != 2 or self.labels.shape != (self.features.shape[0],):
            raise ValueError("features must be (n, p) and labels (n,)")
        if self.num_classes and len(self.labels):
            lo, hi = self.labels.min(), self.labels.max()
            if lo < 0 or hi >= self.num_classes:
                raise ValueError(f"class id out of range [0, {self.num_classes - 1}]")

    def __len__(self):
        return self.features.shape[0]

    def __getitem__(self, i) -> DataPoint:
        return DataPoint(self.features[i], self.labels[i].item())

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    def take(self, indices) -> "Dataset":
        indices = np.asarray(indices, dtype=np.intp)
        return Dataset(self.features[indices], self.labels[indices], self.num_classes)

    def with_labels(self, labels) -> "Dataset":
        return Dataset(self.features, np.asarray(labels, dtype=self.labels.dtype), self.num_classes)

    @classmethod
    def from_points(cls, points: Sequence[DataPoint], num_classes: int = 0) -> "Dataset":
        if len(points) == 0:
            raise ValueError("empty batch")
        feats = np.array([np.asarray(p.features, dtype=np.float64).reshape(-1) for p in points])
        dtype = np.int64 if num_classes else np.float64
        labels = np.array([p.label for p in points], dtype=dtype)
        return cls(feats, labels, num_classes)


@dataclass(frozen=True)
class TaskSpec:
    """A differentiable task plus its smoothness constants.

    ``dimension`` is always the length of the parameter vector. For the
    quadratic family ``smoothness`` and ``weak_convexity`` are the exact
    extreme Hessian eigenvalues; elsewhere they, like ``moment_bound`` and
    ``variance_bound``, are estimates and ``estimated`` is set.
    """

    kind: str
    dimension: int
    smoothness: float
    weak_convexity: float
    moment_bound: float | None = None
    variance_bound: float | None = None
    generator_seed: int = 0
    num_classes: int = 0
    input_dim: int = 0
    estimated: bool = False
    params: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise ValueError(f"unknown task kind {self.kind!r}")
        if not self.smoothness > 0:
            raise ValueError("smoothness L must be > 0")
        if self.weak_convexity > self.smoothness:
            raise ValueError("weak convexity mu must be <= L")

    @property
    def minimizer(self) -> np.ndarray:
        if self.kind != "quadratic":
            raise AttributeError("only the quadratic task has a known minimizer")
        return self.params["x_star"]

    @property
    def is_classification(self) -> bool:
        return self.num_classes > 0


def quadratic_task(curvature, x_star, seed: int = 0) -> TaskSpec:
    """Build a noise-free quadratic task from an explicit diagonal Hessian."""
    a = as_vector(curvature)
    x_star = as_vector(x_star, a.shape[0])
    if np.any(a <= 0):
        raise ValueError("curvature must be positive")
    return TaskSpec(
        "quadratic", a.shape[0], float(a.max()), float(a.min()),
        moment_bound=None, variance_bound=0.0, generator_seed=seed,
        input_dim=a.shape[0], params={"curvature": a, "x_star": x_star},
    )


def _as_dataset(batch) -> Dataset:
    if isinstance(batch, Dataset):
        if len(batch) == 0:
            raise ValueError("empty batch")
        return batch
    return Dataset.from_points(list(batch))


def _check(task: TaskSpec, x, batch):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != task.dimension:
        raise ValueError(f"dimension mismatch: task has {task.dimension}, x has {x.shape}")
    data = _as_dataset(batch)
    if data.num_features != task.input_dim:
        raise ValueError(f"dimension mismatch: task expects {task.input_dim} features, batch has {data.num_features}")
    if task.num_classes and data.num_classes != task.num_classes:
        data = Dataset(data.features, data.labels.astype(np.int64), task.num_classes)
    return x, data


def _mlp_unpack(task: TaskSpec, x: np.ndarray):
    p, h, c = task.input_dim, task.params["hidden"], task.num_classes
    i = 0
    w1 = x[i:i + h * p].reshape(h, p); i += h * p
    b1 = x[i:i + h]; i += h
    w2 = x[i:i + c * h].reshape(c, h); i += c * h
    b2 = x[i:i + c]
    return w1, b1, w2, b2


def _mlp_forward(task, x, feats):
    w1, b1, w2, b2 = _mlp_unpack(task, x)
    hid = np.tanh(feats @ w1.T + b1)
    logits = hid @ w2.T + b2
    return hid, logits


def _log_softmax(logits):
    shift = logits - logits.max(axis=1, keepdims=True)
    return shift - np.log(np.exp(shift).sum(axis=1, keepdims=True))


def point_losses(task: TaskSpec, x, batch) -> np.ndarray:
    """Per-point losses ``f(x; z)`` over a batch."""
    x, data = _check(task, x, batch)
    feats = data.features
    if task.kind == "quadratic":
        a, x_star = task.params["curvature"], task.params["x_star"]
        dx = x - x_star
        return 0.5 * np.dot(dx * a, dx) + feats @ dx
    if task.kind == "logistic":
        y = 2.0 * data.labels - 1.0
        return np.logaddexp(0.0, -y * (feats @ x))
    _, logits = _mlp_forward(task, x, feats)
    return -_log_softmax(logits)[np.arange(len(data)), data.labels]


def loss_eval(task: TaskSpec, x, batch) -> float:
    """Mean loss over ``batch``."""
    return float(np.mean(point_losses(task, x, batch)))


def grad_eval(task: TaskSpec, x, batch) -> np.ndarray:
    """Gradient of the batch-mean loss at ``x``."""
    x, data = _check(task, x, batch)
    feats, n = data.features, len(data)
    if task.kind == "quadratic":
        a, x_star = task.params["curvature"], task.params["x_star"]
        return a * (x - x_star) + feats.mean(axis=0)
    if task.kind == "logistic":
        y = 2.0 * data.labels - 1.0
        # d/ds log(1 + e^{-ys}) = -y * sigmoid(-ys)
        coef = -y * np.exp(-np.logaddexp(0.0, y * (feats @ x)))
        return coef @ feats / n
    w1, b1, w2, b2 = _mlp_unpack(task, x)
    hid, logits = _mlp_forward(task, x, feats)
    dlogits = np.exp(_log_softmax(logits))
    dlogits[np.arange(n), data.labels] -= 1.0
    dlogits /= n
    dhid = (dlogits @ w2) * (1.0 - hid * hid)
    return np.concatenate([
        (dhid.T @ feats).ravel(), dhid.sum(axis=0),
        (dlogits.T @ hid).ravel(), dlogits.sum(axis=0),
    ])


def predict(task: TaskSpec, x, batch) -> np.ndarray:
    """Top-1 class predictions; ties go to the lowest class id."""
    x, data = _check(task, x, batch)
    if task.kind == "logistic":
        return (data.features @ x > 0.0).astype(np.int64)
    if task.kind == "mlp":
        return np.argmax(_mlp_forward(task, x, data.features)[1], axis=1)
    raise ValueError("predictions are only defined for classification tasks")


def sample_batch(dataset: Dataset, size: int, rng: Rng) -> Dataset:
    """Draw ``size`` points uniformly with replacement."""
    if size < 1:
        raise ValueError("empty batch requested")
    if len(dataset) == 0:
        raise ValueError("cannot sample from an empty dataset")
    return dataset.take(rng.integers(len(dataset), size=size))


def partition_dataset(dataset: Dataset, m: int) -> list[Dataset]:
    """Split into ``m`` disjoint label-sorted contiguous shards."""
    if m < 1:
        raise ValueError("need at least one shard")
    if m > len(dataset):
        raise ValueError(f"cannot split {len(dataset)} points into {m} shards")
    order = np.argsort(dataset.labels, kind="stable")
    return [dataset.take(idx) for idx in np.array_split(order, m)]


def _init_box_max_sq(a, x_star, half_width=0.5):
    # max over the init box of ||A (x - x*)||^2, attained coordinatewise at a corner
    far = np.maximum(np.abs(half_width - x_star), np.abs(-half_width - x_star))
    return float(np.sum((a * far) ** 2))


def _mlp_param_count(p, h, c):
    return h * p + h + c * h + c


def _blobs(rng: Rng, n, p, centers, sigma=1.0):
    c = centers.shape[0]
    labels = np.arange(n) % c
    labels = labels[rng.choice(n, n)]
    feats = centers[labels] + rng.normal(0.0, sigma, size=(n, p))
    return feats, labels.astype(np.int64)


def _estimate_moments(task: TaskSpec, data: Dataset, rng: Rng):
    """Empirical per-sample gradient variance and second moment at a random point."""
    x = rng.uniform(-0.5, 0.5, size=task.dimension)
    idx = rng.integers(len(data), size=ESTIMATE_SAMPLES)
    grads = np.empty((ESTIMATE_SAMPLES, task.dimension))
    # batched by unique index: per-point gradients are deterministic
    uniq, inverse = np.unique(idx, return_inverse=True)
    per_point = np.array([grad_eval(task, x, data.take([i])) for i in uniq])
    grads[:] = per_point[inverse]
    mean = grads.mean(axis=0)
    var = float(np.mean(np.sum((grads - mean) ** 2, axis=1)))
    second = float(np.mean(np.sum(grads ** 2, axis=1)))
    return var, second


def _estimate_curvature(task: TaskSpec, data: Dataset, rng: Rng, probes=24, eps=1e-5):
    sub = data.take(rng.integers(len(data), size=min(len(data), 512)))
    curv = []
    for _ in range(probes):
        x = rng.uniform(-0.5, 0.5, size=task.dimension)
        v = rng.normal(size=task.dimension)
        v /= np.linalg.norm(v)
        g1 = grad_eval(task, x + eps * v, sub)
        g0 = grad_eval(task, x - eps * v, sub)
        curv.append(float(np.dot(g1 - g0, v) / (2 * eps)))
    return max(max(curv), 1e-12), min(curv)


def make_task(kind: str, dimension: int, num_points: int, seed: int, **options):
    """Generate a task and its training dataset from a seed.

    ``dimension`` is the parameter length for ``quadratic`` and the number
    of input features for ``logistic`` and ``mlp``.

    Options:
        quadratic: ``noise`` (std of the per-point gradient noise, default 1),
            ``curvature`` (``(low, high)`` eigenvalue range, default ``(1, 1)``),
            ``x_star`` (minimizer; drawn uniformly from ``[-1, 1]^d`` if absent).
        logistic: ``separation`` (distance between blob centres in units of
            the blob std, default 4).
        mlp: ``hidden`` (width, at most 16, default 8), ``num_classes``
            (default 3), ``separation`` (default 4).

    Returns:
        ``(TaskSpec, Dataset)``.
    """
    if kind not in TASK_KINDS:
        raise ValueError(f"unknown task kind {kind!r}")
    if dimension < 1 or num_points < 1:
        raise ValueError("dimension and num_points must be >= 1")
    rng = Rng(seed, DATA)

    if kind == "quadratic":
        noise = float(options.get("noise", 1.0))
        lo, hi = options.get("curvature", (1.0, 1.0))
        if not 0 < lo <= hi:
            raise ValueError("curvature must satisfy 0 < low <= high")
        a = np.linspace(lo, hi, dimension) if dimension > 1 else np.array([float(hi)])
        x_star = rng.uniform(-1.0, 1.0, size=dimension)
        if options.get("x_star") is not None:
            x_star = as_vector(options["x_star"], dimension)
        xi = rng.normal(0.0, 1.0, size=(num_points, dimension)) * noise
        xi -= xi.mean(axis=0)
        variance = float(np.mean(np.sum(xi ** 2, axis=1)))
        task = TaskSpec(
            kind, dimension, float(a.max()), float(a.min()),
            moment_bound=_init_box_max_sq(a, x_star) + variance,
            variance_bound=variance, generator_seed=seed, input_dim=dimension,
            params={"curvature": a, "x_star": x_star, "noise": noise},
        )
        return task, Dataset(xi, np.zeros(num_points), 0)

    sep = float(options.get("separation", 4.0))
    if kind == "logistic":
        u = rng.normal(size=dimension)
        u /= np.linalg.norm(u)
        centers = np.stack([-0.5 * sep * u, 0.5 * sep * u])
        feats, labels = _blobs(rng, num_points, dimension, centers)
        data = Dataset(feats, labels, 2)
        smooth = float(np.max(np.sum(feats ** 2, axis=1)) / 4.0)
        task = TaskSpec(kind, dimension, smooth, 0.0, generator_seed=seed,
                        num_classes=2, input_dim=dimension, estimated=True,
                        params={"centers": centers, "separation": sep})
    else:
        hidden = int(options.get("hidden", 8))
        classes = int(options.get("num_classes", 3))
        if not 1 <= hidden <= MAX_HIDDEN:
            raise ValueError(f"hidden width must be in [1, {MAX_HIDDEN}]")
        if classes < 2:
            raise ValueError("mlp needs at least 2 classes")
        dirs = rng.normal(size=(classes, dimension))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        centers = 0.5 * sep * dirs
        feats, labels = _blobs(rng, num_points, dimension, centers)
        data = Dataset(feats, labels, classes)
        task = TaskSpec(kind, _mlp_param_count(dimension, hidden, classes), 1.0, 0.0,
                        generator_seed=seed, num_classes=classes, input_dim=dimension,
                        estimated=True, params={"centers": centers, "hidden": hidden, "separation": sep})

    est = Rng(seed, ESTIMATE)
    variance, second = _estimate_moments(task, data, est)
    updates = {"variance_bound": variance, "moment_bound": second}
    if kind == "mlp":
        smooth, weak = _estimate_curvature(task, data, est)
        updates.update(smoothness=smooth, weak_convexity=min(weak, smooth))
    return replace(task, **updates), data


def draw_points(task: TaskSpec, num_points: int, rng: Rng) -> Dataset:
    """Fresh points from the task's generating distribution (e.g. a test set)."""
    if num_points < 1:
        raise ValueError("num_points must be >= 1")
    if task.kind == "quadratic":
        noise = task.params.get("noise", 0.0)
        xi = rng.normal(0.0, 1.0, size=(num_points, task.dimension)) * noise
        return Dataset(xi, np.zeros(num_points), 0)
    feats, labels = _blobs(rng, num_points, task.input_dim, task.params["centers"])
    return Dataset(feats, labels, task.num_classes)


def full_objective(task: TaskSpec, x) -> tuple[float, np.ndarray]:
    """Closed-form ``F`` and its gradient for the quadratic family."""
    a, x_star = task.params["curvature"], task.params["x_star"]
    dx = np.asarray(x, dtype=np.float64) - x_star
    return 0.5 * float(np.dot(dx * a, dx)), a * dx
