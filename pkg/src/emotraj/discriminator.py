"""Ranking eigen directions by how far apart the emotion classes sit."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DimensionMismatch, SingleClass

DEFAULT_D = 10


class LabeledTrajectory(NamedTuple):
    """A (K, L) weight trajectory with its emotion label."""

    weights: np.ndarray
    label: str
    sequence_id: str = ""


@dataclass(frozen=True)
class DirectionSelection:
    indices: tuple[int, ...]
    scores: tuple[float, ...]
    reduced: bool = False

    def __len__(self):
        return len(self.indices)


def between_class_scores(trajectories) -> np.ndarray:
    """Population variance across classes of each direction's class mean.

    Class means pool every frame of every sequence in the class. All sums
    are exactly rounded, so the result does not depend on input order.
    """
    by_label: dict[str, list[np.ndarray]] = {}
    k = None
    for tr in trajectories:
        w = np.asarray(tr.weights, dtype=np.float64)
        if k is None:
            k = w.shape[0]
        elif w.shape[0] != k:
            raise DimensionMismatch("trajectories disagree on the number of eigen directions")
        by_label.setdefault(tr.label, []).append(w)
    if len(by_label) < 2:
        raise SingleClass(f"need at least two emotion classes, got {sorted(by_label)}")

    means = np.empty((len(by_label), k))
    for c, label in enumerate(sorted(by_label)):
        pooled = np.concatenate(by_label[label], axis=1)
        for d in range(k):
            means[c, d] = math.fsum(pooled[d]) / pooled.shape[1]
    scores = np.empty(k)
    n = means.shape[0]
    for d in range(k):
        if np.all(means[:, d] == means[0, d]):
            # fsum(n*m)/n can miss m by an ulp; equal means score exactly 0
            scores[d] = 0.0
            continue
        mu = math.fsum(means[:, d]) / n
        scores[d] = math.fsum((means[:, d] - mu) ** 2) / n
    return scores


def select_directions(trajectories, d: int = DEFAULT_D) -> DirectionSelection:
    """Top-``d`` directions by between-class variance, ties to the lower index."""
    trajectories = list(trajectories)
    if d < 1:
        raise ValueError("d must be >= 1")
    scores = between_class_scores(trajectories)
    order = np.argsort(-scores, kind="stable")
    reduced = scores.shape[0] < d
    top = order[:d]
    return DirectionSelection(tuple(int(i) for i in top), tuple(float(scores[i]) for i in top), reduced)
