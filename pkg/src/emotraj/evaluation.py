"""Train/test splits, confusion matrices and their reports."""
from __future__ import annotations

import io
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import EmptyTestSet, SingleSequenceClass, UnknownLabel
from .imagecore import DatasetManifest


def _round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


def split_dataset(manifest: DatasetManifest, train_fraction: float, seed: int):
    """Stratified per-label split of whole sequences.

    Each label's sequence ids are sorted, shuffled by a generator seeded
    with ``seed`` (labels visited in sorted order), and the first
    round(train_fraction * n) go to training, at least one. A class of two
    or more sequences always keeps one for testing.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    by_label: dict[str, list] = {}
    for rec in manifest.records:
        by_label.setdefault(rec.label, []).append(rec)
    train_ids, test_ids = set(), set()
    for label in sorted(by_label):
        recs = sorted(by_label[label], key=lambda r: r.sequence_id)
        perm = rng.permutation(len(recs))
        n_train = max(1, _round_half_up(train_fraction * len(recs)))
        if len(recs) < 2:
            warnings.warn(f"class {label!r} has a single sequence; it goes to training only",
                          SingleSequenceClass, stacklevel=2)
        else:
            n_train = min(n_train, len(recs) - 1)
        for rank, j in enumerate(perm):
            (train_ids if rank < n_train else test_ids).add(recs[j].sequence_id)
    train = manifest.subset(r for r in manifest.records if r.sequence_id in train_ids)
    test = manifest.subset(r for r in manifest.records if r.sequence_id in test_ids)
    return train, test


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Row i, column j: fraction of true-class-i sequences predicted as j."""

    emotions: tuple[str, ...]
    counts: np.ndarray

    @property
    def rows(self) -> np.ndarray:
        totals = self.counts.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(totals > 0, self.counts / np.maximum(totals, 1), 0.0)

    @property
    def present(self) -> np.ndarray:
        return self.counts.sum(axis=1) > 0

    @property
    def accuracy(self) -> float:
        """Mean of the diagonal over classes that have test sequences."""
        return float(np.mean(np.diag(self.rows)[self.present]))

    @property
    def pooled_accuracy(self) -> float:
        return float(np.trace(self.counts) / self.counts.sum())


def confusion_from_predictions(emotions, truths, predictions) -> ConfusionMatrix:
    emotions = tuple(emotions)
    index = {e: i for i, e in enumerate(emotions)}
    counts = np.zeros((len(emotions), len(emotions)), dtype=np.int64)
    for t, p in zip(truths, predictions, strict=True):
        for lab in (t, p):
            if lab not in index:
                raise UnknownLabel(f"label {lab!r} is not one of {list(emotions)}")
        counts[index[t], index[p]] += 1
    if counts.sum() == 0:
        raise EmptyTestSet("no test sequences to evaluate")
    return ConfusionMatrix(emotions, counts)


def evaluate(pipeline, test: DatasetManifest) -> tuple[ConfusionMatrix, list]:
    """Classify every test sequence and tally the confusion matrix.

    Returns the matrix and one (sequence_id, true, predicted, residuals)
    tuple per sequence in manifest order.
    """
    if not test.records:
        raise EmptyTestSet("test manifest holds no sequences")
    emotions = pipeline.emotions
    for rec in test.records:
        if rec.label not in emotions:
            raise UnknownLabel(f"test label {rec.label!r} not known to the model {list(emotions)}")
    outcomes = []
    for rec in test.records:
        idx, res = pipeline.classify_record(rec)
        outcomes.append((rec.sequence_id, rec.label, emotions[idx], res))
    cm = confusion_from_predictions(emotions, [o[1] for o in outcomes], [o[2] for o in outcomes])
    return cm, outcomes


# -- reports ---------------------------------------------------------------------

def _truncate(v: float, decimals: int) -> str:
    # the published tables cut digits rather than round them (22/24 -> 0.916)
    scale = 10 ** decimals
    q = math.floor(v * scale + 1e-9) / scale
    return str(int(q)) if q == int(q) else f"{q:.{decimals}f}"


def format_table(cm: ConfusionMatrix, decimals: int | None = 3) -> str:
    """Aligned plain-text table: true classes down, predictions across.

    ``decimals=None`` prints full precision.
    """
    rows = cm.rows
    cells = [[repr(float(v)) if decimals is None else _truncate(float(v), decimals) for v in row] for row in rows]
    width = max([len(e) for e in cm.emotions] + [len(c) for r in cells for c in r])
    out = io.StringIO()
    out.write(" " * width + "".join(f"  {e:>{width}}" for e in cm.emotions) + "\n")
    for e, r in zip(cm.emotions, cells):
        out.write(f"{e:<{width}}" + "".join(f"  {c:>{width}}" for c in r) + "\n")
    out.write(f"accuracy (diagonal mean): {100 * cm.accuracy:.1f} %\n")
    out.write(f"accuracy (pooled): {100 * cm.pooled_accuracy:.1f} %\n")
    return out.getvalue()


def format_csv(cm: ConfusionMatrix) -> str:
    out = io.StringIO()
    out.write("true,predicted,fraction\n")
    rows = cm.rows
    for i, t in enumerate(cm.emotions):
        for j, p in enumerate(cm.emotions):
            out.write(f"{t},{p},{float(rows[i, j])!r}\n")
    out.write(f"accuracy,diagonal_mean,{cm.accuracy!r}\n")
    out.write(f"accuracy,pooled,{cm.pooled_accuracy!r}\n")
    return out.getvalue()
