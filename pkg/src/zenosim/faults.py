"""Failure injection: which workers are faulty, and what they send.

Label flipping poisons a faulty worker's data before it computes an honest
gradient on it. Bit flipping and the arbitrary attack rewrite the gradient
candidates after they are computed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .aggregation import GradientSet
from .rng import Rng

FAULT_KINDS = ("none", "label_flip", "bit_flip", "arbitrary")
SELECTIONS = ("fixed", "rotating", "random")


@dataclass(frozen=True)
class FaultSpec:
    kind: str = "none"
    q: int = 0
    selection: str = "fixed"
    magnitude: float = -10.0

    def __post_init__(self):
        if self.kind not in FAULT_KINDS:
            raise ValueError(f"unknown fault kind {self.kind!r}")
        if self.selection not in SELECTIONS:
            raise ValueError(f"unknown selection policy {self.selection!r}")
        if self.q < 0:
            raise ValueError("q must be >= 0")

    @property
    def active_q(self) -> int:
        return 0 if self.kind == "none" else self.q

    @property
    def gradient_level(self) -> bool:
        return self.kind in ("bit_flip", "arbitrary")


def select_faulty(m: int, q: int, selection: str, t: int, rng: Rng | None = None) -> frozenset:
    """Indices of the workers that are faulty at iteration ``t``."""
    if not 0 <= q <= m:
        raise ValueError(f"need 0 <= q <= m, got q={q}, m={m}")
    if q == 0:
        return frozenset()
    if selection == "fixed":
        return frozenset(range(q))
    if selection == "rotating":
        return frozenset((t * q + i) % m for i in range(q))
    if selection == "random":
        if rng is None:
            raise ValueError("random selection needs an rng")
        return frozenset(int(i) for i in rng.choice(m, q, replace=False))
    raise ValueError(f"unknown selection policy {selection!r}")


def flip_label(label: int, num_classes: int) -> int:
    if not 0 <= label < num_classes:
        raise ValueError(f"label {label} out of range [0, {num_classes - 1}]")
    return num_classes - 1 - label


def flip_labels(labels: np.ndarray, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise ValueError(f"label out of range [0, {num_classes - 1}]")
    return (num_classes - 1 - labels).astype(labels.dtype)


def _check_subset(g: GradientSet, faulty) -> list[int]:
    idx = sorted(int(i) for i in faulty)
    if idx and (idx[0] < 0 or idx[-1] >= g.m):
        raise ValueError("faulty indices must lie in [0, m)")
    return idx


def apply_bit_flip(g: GradientSet, faulty) -> GradientSet:
    """Faulty workers send the negation of the lowest-indexed faulty gradient."""
    idx = _check_subset(g, faulty)
    if not idx:
        return g
    out = g.candidates.copy()
    flipped = -g.candidates[idx[0]]
    out[idx] = flipped
    return GradientSet(out, frozenset(idx))


def apply_arbitrary(g: GradientSet, faulty, magnitude: float, rng: Rng) -> GradientSet:
    """Faulty workers send ``magnitude`` times the mean of the correct candidates.

    When every worker is faulty there is no correct mean; each faulty
    candidate becomes ``magnitude`` times a random unit vector instead.
    """
    idx = _check_subset(g, faulty)
    if not idx:
        return g
    out = g.candidates.copy()
    correct = [i for i in range(g.m) if i not in set(idx)]
    if correct:
        out[idx] = magnitude * g.candidates[correct].mean(axis=0)
    else:
        u = rng.normal(size=g.dimension)
        out[idx] = magnitude * (u / np.linalg.norm(u))
    return GradientSet(out, frozenset(idx))


def inject(spec: FaultSpec, g: GradientSet, faulty, rng: Rng) -> GradientSet:
    """Apply the gradient-level part of ``spec``; other kinds only tag ``truth``."""
    if spec.kind == "bit_flip":
        return apply_bit_flip(g, faulty)
    if spec.kind == "arbitrary":
        return apply_arbitrary(g, faulty, spec.magnitude, rng)
    return GradientSet(g.candidates, frozenset(faulty))
