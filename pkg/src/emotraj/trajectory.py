"""Monic polynomial models of emotion trajectories and residual classification.

Each (emotion, direction) pair owns a monic polynomial of degree L whose
roots ideally are the scaled weights of that emotion's frames along that
direction. A sequence scores low against an emotion when its own weights
come close to being roots.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .discriminator import DirectionSelection
from .errors import DimensionMismatch, MissingEmotion


@dataclass(frozen=True)
class DirectionScaler:
    """Affine map of the training range [lo, hi] onto [-1, 1]."""

    lo: float
    hi: float

    @property
    def constant(self) -> bool:
        return not self.hi > self.lo

    def __call__(self, w):
        return scale_weight(self, w)

    @classmethod
    def fit(cls, values) -> "DirectionScaler":
        values = np.asarray(values, dtype=np.float64)
        return cls(float(values.min()), float(values.max()))


def scale_weight(s: DirectionScaler, w):
    """(2w - lo - hi) / (hi - lo); a constant scaler maps everything to 0."""
    w = np.asarray(w, dtype=np.float64)
    out = np.zeros_like(w) if s.constant else (2.0 * w - s.lo - s.hi) / (s.hi - s.lo)
    return out if out.ndim else float(out)


def poly_from_roots(roots) -> np.ndarray:
    """Coefficients of prod(x - r), highest degree first, leading 1."""
    coeffs = np.array([1.0])
    for r in np.asarray(roots, dtype=np.float64):
        coeffs = np.append(coeffs, 0.0) - r * np.concatenate(([0.0], coeffs))
    coeffs[0] = 1.0
    return coeffs


def evaluate_poly(coeffs, x):
    """Horner evaluation, highest degree first."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    acc = np.zeros_like(np.asarray(x, dtype=np.float64)) + coeffs[0]
    for c in coeffs[1:]:
        acc = acc * x + c
    return acc if np.ndim(acc) else float(acc)


def poly_derivative(coeffs) -> np.ndarray:
    coeffs = np.asarray(coeffs, dtype=np.float64)
    deg = coeffs.shape[0] - 1
    return coeffs[:-1] * np.arange(deg, 0, -1)


def fit_monic(points, degree: int) -> np.ndarray:
    """Monic least squares: minimize sum p(x)^2 over the lower coefficients.

    Rows are [x^(n-1) ... x 1] with target -x^n; solved by an SVD-based
    least-squares routine. The leading 1 is pinned, never solved for.

    The optimum depends only on the multiset of points, so the rows are
    built from the sorted distinct points weighted by sqrt(multiplicity),
    with multiplicities reduced by their gcd. Repeating the data or
    reordering it then reproduces the coefficients bit for bit.
    """
    x = np.asarray(points, dtype=np.float64).ravel()
    x, counts = np.unique(x, return_counts=True)
    root = np.sqrt(counts // np.gcd.reduce(counts))[:, None]
    vander = np.vander(x, degree + 1) * root     # columns x^n ... x^0
    lower, *_ = np.linalg.lstsq(vander[:, 1:], -vander[:, 0], rcond=None)
    return np.concatenate(([1.0], lower))


@dataclass(frozen=True, eq=False)
class EmotionPolynomialModel:
    """Per-emotion, per-direction monic polynomial coefficients.

    ``coefficients`` has shape (E, D, L+1), highest degree first.
    """

    emotions: tuple[str, ...]
    directions: DirectionSelection
    coefficients: np.ndarray
    scalers: tuple[DirectionScaler, ...]

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=np.float64, copy=True)
        if c.ndim != 3 or c.shape[:2] != (len(self.emotions), len(self.directions.indices)):
            raise DimensionMismatch(f"coefficient array of shape {c.shape} does not match E x D")
        if len(self.scalers) != c.shape[1]:
            raise DimensionMismatch("one scaler per direction required")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    @property
    def degree(self) -> int:
        return self.coefficients.shape[2] - 1

    def scaled(self, weights) -> np.ndarray:
        """(D, L) scaled weights along the selected directions."""
        weights = np.asarray(weights, dtype=np.float64)
        idx = self.directions.indices
        if weights.ndim != 2 or (idx and max(idx) >= weights.shape[0]):
            raise DimensionMismatch(
                f"trajectory with {weights.shape[0] if weights.ndim else 0} directions does not "
                f"cover selected index {max(idx)}"
            )
        return np.stack([scale_weight(s, weights[i]) for s, i in zip(self.scalers, idx)])

    def residuals(self, weights) -> np.ndarray:
        x = np.ascontiguousarray(self.scaled(weights))
        return kernels.poly_residuals(np.ascontiguousarray(self.coefficients), x)


def fit_emotion_polynomials(trajectories, directions: DirectionSelection, emotions=None) -> EmotionPolynomialModel:
    """Fit one monic polynomial per (emotion, direction) over pooled sequences.

    Scalers come from the pooled training weights of every emotion along
    each direction. With one training sequence of distinct weights the fit
    interpolates, i.e. reproduces :func:`poly_from_roots`.
    """
    trajectories = list(trajectories)
    if emotions is None:
        emotions = tuple(sorted({t.label for t in trajectories}))
    emotions = tuple(emotions)
    lengths = {np.asarray(t.weights).shape[1] for t in trajectories}
    if len(lengths) > 1:
        raise DimensionMismatch(f"trajectories have mixed lengths {sorted(lengths)}")
    degree = lengths.pop() if lengths else 0
    idx = directions.indices
    groups = {e: [] for e in emotions}
    for t in trajectories:
        if t.label in groups:
            groups[t.label].append(np.asarray(t.weights, dtype=np.float64))
    missing = [e for e, g in groups.items() if not g]
    if missing:
        raise MissingEmotion(f"no training sequences for {missing}")

    pooled = np.concatenate([w for g in groups.values() for w in g], axis=1)
    if idx and max(idx) >= pooled.shape[0]:
        raise DimensionMismatch(f"direction index {max(idx)} exceeds trajectory size {pooled.shape[0]}")
    scalers = tuple(DirectionScaler.fit(pooled[i]) for i in idx)

    coeffs = np.empty((len(emotions), len(idx), degree + 1))
    for e, emotion in enumerate(emotions):
        stacked = np.concatenate(groups[emotion], axis=1)
        for d, (i, s) in enumerate(zip(idx, scalers)):
            coeffs[e, d] = fit_monic(scale_weight(s, stacked[i]), degree)
    return EmotionPolynomialModel(emotions, directions, coeffs, scalers)


def residual(model: EmotionPolynomialModel, weights, emotion: int) -> float:
    """Sum over directions and frames of the squared polynomial value."""
    x = model.scaled(weights)
    total = 0.0
    for d in range(x.shape[0]):
        v = evaluate_poly(model.coefficients[emotion, d], x[d])
        total += float(np.sum(v * v))
    return total


def classify(model: EmotionPolynomialModel, weights) -> tuple[int, np.ndarray]:
    """(argmin emotion index, residual per emotion); ties go to the lowest index."""
    res = model.residuals(weights)
    return int(np.argmin(res)), res
