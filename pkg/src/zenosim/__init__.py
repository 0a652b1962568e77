"""Byzantine-tolerant synchronous SGD simulator with suspicion-based aggregation."""

from .aggregation import (
    AggregatorConfig,
    GradientSet,
    ScoreOracle,
    aggregate,
    aggregate_krum,
    aggregate_mean,
    aggregate_median,
    aggregate_zeno,
    zeno_score,
    zeno_scores,
)
from .core import (
    DataPoint,
    Dataset,
    TaskSpec,
    grad_eval,
    loss_eval,
    make_task,
    partition_dataset,
    quadratic_task,
    sample_batch,
)
from .faults import FaultSpec, apply_arbitrary, apply_bit_flip, flip_label, select_faulty
from .kernels import BACKEND
from .rng import Rng
from .simulator import SimConfig, Trace, evaluate, run_experiment

__version__ = "0.1.0"
