"""Integral images, rectangular Haar-like features, AdaBoost stumps and a
single-stage sliding-window detector."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import EmptyClass, OutOfBounds
from .imagecore import GrayImage

FEATURE_KINDS = ("two_h", "two_v", "three_h", "three_v", "four")

# Unit-rectangle layout per kind: (dx, dy, sign) in multiples of (w, h), and
# the extent in the same units. The middle bar of the three-rectangle
# features is two units wide so white and black areas match.
_LAYOUT = {
    "two_h": ([(0, 0, 1, 1, -1), (1, 0, 1, 1, +1)], (2, 1)),
    "two_v": ([(0, 0, 1, 1, -1), (0, 1, 1, 1, +1)], (1, 2)),
    "three_h": ([(0, 0, 1, 1, +1), (1, 0, 2, 1, -1), (3, 0, 1, 1, +1)], (4, 1)),
    "three_v": ([(0, 0, 1, 1, +1), (0, 1, 1, 2, -1), (0, 3, 1, 1, +1)], (1, 4)),
    "four": ([(0, 0, 1, 1, +1), (1, 0, 1, 1, -1), (0, 1, 1, 1, -1), (1, 1, 1, 1, +1)], (2, 2)),
}

# Fallback exponent for a perfectly separating stump.
_MIN_STUMP_ERROR = 1e-10


@dataclass(frozen=True, eq=False)
class IntegralImage:
    """Zero-padded summed-area table of shape (height+1, width+1).

    ``table[y + 1, x + 1]`` holds the sum of intensities over x' <= x, y' <= y.
    Integer-valued images get int64 accumulators, others float64.
    """

    table: np.ndarray

    @property
    def width(self) -> int:
        return self.table.shape[1] - 1

    @property
    def height(self) -> int:
        return self.table.shape[0] - 1

    def at(self, x: int, y: int):
        return self.table[y + 1, x + 1].item()


def _as_array(img) -> np.ndarray:
    return img.pixels if isinstance(img, GrayImage) else np.asarray(img, dtype=np.float64)


def integral_image(img) -> IntegralImage:
    pixels = _as_array(img)
    if np.all(pixels == np.floor(pixels)):
        pixels = pixels.astype(np.int64)
    else:
        pixels = np.ascontiguousarray(pixels, dtype=np.float64)
    table = kernels.integral_table(pixels)
    table.setflags(write=False)
    return IntegralImage(table)


def rect_sum(ii: IntegralImage, x: int, y: int, w: int, h: int):
    """Sum over the w x h rectangle with top-left pixel (x, y); four lookups."""
    if w < 0 or h < 0 or x < 0 or y < 0 or x + w > ii.width or y + h > ii.height:
        raise OutOfBounds(f"rectangle ({x}, {y}, {w}, {h}) outside {ii.width}x{ii.height} image")
    t = ii.table
    return (t[y + h, x + w] - t[y, x + w] - t[y + h, x] + t[y, x]).item()


def rect_sums(ii: IntegralImage, xs, ys, ws, hs) -> np.ndarray:
    """Vectorized :func:`rect_sum` over arrays of rectangles."""
    xs, ys, ws, hs = (np.asarray(a, dtype=np.int64) for a in (xs, ys, ws, hs))
    if (np.any(xs < 0) or np.any(ys < 0) or np.any(ws < 0) or np.any(hs < 0)
            or np.any(xs + ws > ii.width) or np.any(ys + hs > ii.height)):
        raise OutOfBounds("rectangle outside image")
    return kernels.rect_sums(ii.table, xs, ys, ws, hs)


@dataclass(frozen=True)
class HaarFeature:
    """A Haar-like feature inside a ``window`` x ``window`` detection window.

    ``w`` and ``h`` are the unit rectangle size; the feature spans
    ``extent`` units from anchor (x, y).
    """

    kind: str
    x: int
    y: int
    w: int
    h: int
    window: int

    def __post_init__(self):
        if self.kind not in _LAYOUT:
            raise ValueError(f"unknown feature kind {self.kind!r}")
        ew, eh = self.extent
        if self.w < 1 or self.h < 1 or self.x < 0 or self.y < 0 or self.x + ew > self.window or self.y + eh > self.window:
            raise OutOfBounds(f"{self} does not fit its window")

    @property
    def extent(self) -> tuple[int, int]:
        uw, uh = _LAYOUT[self.kind][1]
        return uw * self.w, uh * self.h

    def rectangles(self):
        """(x, y, w, h, sign) tuples relative to the window origin."""
        return [
            (self.x + dx * self.w, self.y + dy * self.h, sw * self.w, sh * self.h, sign)
            for dx, dy, sw, sh, sign in _LAYOUT[self.kind][0]
        ]


def _round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


def _scaled_rects(f: HaarFeature, scale: float):
    """Scaled rectangles plus signed weights with the black side rebalanced.

    Returns (rects, weights, white_area) where rects holds (x, y, w, h)
    relative to the window origin.
    """
    rects = []
    for x, y, w, h, sign in f.rectangles():
        x0 = _round_half_up(x * scale)
        y0 = _round_half_up(y * scale)
        x1 = _round_half_up((x + w) * scale)
        y1 = _round_half_up((y + h) * scale)
        rects.append((x0, y0, x1 - x0, y1 - y0, sign))
    white = sum(w * h for _, _, w, h, s in rects if s > 0)
    black = sum(w * h for _, _, w, h, s in rects if s < 0)
    if white == 0 or black == 0:
        raise OutOfBounds(f"{f} collapses to zero area at scale {scale}")
    ratio = white / black
    weights = [1.0 if s > 0 else -ratio for *_, s in rects]
    return [r[:4] for r in rects], weights, white


def feature_value(ii: IntegralImage, f: HaarFeature, window_origin=(0, 0), scale: float = 1.0) -> float:
    """White-region sum minus (area-corrected) black-region sum."""
    ox, oy = window_origin
    rects, weights, _ = _scaled_rects(f, scale)
    total = 0.0
    for (x, y, w, h), wt in zip(rects, weights):
        total += wt * rect_sum(ii, ox + x, oy + y, w, h)
    return total


def enumerate_features(window: int, step: int = 1, kinds=FEATURE_KINDS, min_unit: int = 1) -> list[HaarFeature]:
    """All features of the given kinds on a ``step`` grid inside the window."""
    out = []
    for kind in kinds:
        uw, uh = _LAYOUT[kind][1]
        for w in range(min_unit, window // uw + 1, step):
            for h in range(min_unit, window // uh + 1, step):
                for y in range(0, window - uh * h + 1, step):
                    for x in range(0, window - uw * w + 1, step):
                        out.append(HaarFeature(kind, x, y, w, h, window))
    return out


def _pack(features, scale=1.0):
    """Padded (F, 4) rectangle arrays for the kernels plus per-feature white areas."""
    n = len(features)
    rx = np.zeros((n, 4), dtype=np.int64)
    ry = np.zeros((n, 4), dtype=np.int64)
    rw = np.zeros((n, 4), dtype=np.int64)
    rh = np.zeros((n, 4), dtype=np.int64)
    rwt = np.zeros((n, 4))
    white = np.zeros(n)
    for i, f in enumerate(features):
        rects, weights, white[i] = _scaled_rects(f, scale)
        for k, ((x, y, w, h), wt) in enumerate(zip(rects, weights)):
            rx[i, k], ry[i, k], rw[i, k], rh[i, k], rwt[i, k] = x, y, w, h, wt
    return rx, ry, rw, rh, rwt, white


def feature_matrix(windows, features) -> np.ndarray:
    """(N, F) feature values for N equally sized windows."""
    tables = np.stack([integral_image(w).table.astype(np.float64) for w in windows])
    rx, ry, rw, rh, rwt, _ = _pack(features)
    return kernels.haar_matrix(tables, rx, ry, rw, rh, rwt)


# -- AdaBoost --------------------------------------------------------------------

@dataclass(frozen=True)
class StumpClassifier:
    """Votes +1 when ``polarity * (value - threshold) > 0``."""

    feature: HaarFeature
    threshold: float
    polarity: int
    alpha: float

    def predict(self, value: float) -> int:
        return 1 if self.polarity * (value - self.threshold) > 0 else -1


@dataclass
class BoostResult:
    stumps: list[StumpClassifier]
    degenerate: bool = False
    weights: list[np.ndarray] = field(default_factory=list)   # example weights entering each round
    errors: list[float] = field(default_factory=list)         # weighted error of each admitted stump

    def __iter__(self):
        return iter(self.stumps)

    def __len__(self):
        return len(self.stumps)


def adaboost_train(positives, negatives, rounds: int, features=None, window: int | None = None,
                   feature_step: int = 1) -> BoostResult:
    """Discrete AdaBoost over decision stumps on Haar features.

    Weights start uniform over all examples. Each round takes the stump of
    least weighted error (thresholds at midpoints of consecutive distinct
    feature values; ties go to the lowest feature index, then the lowest
    threshold, then polarity +1). Training stops early when the best error
    reaches 0.5, or right after admitting a stump with zero error.
    """
    if not positives or not negatives:
        raise EmptyClass("AdaBoost needs at least one positive and one negative window")
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    windows = [_as_array(w) for w in list(positives) + list(negatives)]
    if window is None:
        window = windows[0].shape[0]
    if any(w.shape != (window, window) for w in windows):
        raise OutOfBounds(f"all training windows must be {window}x{window}")
    if features is None:
        features = enumerate_features(window, step=feature_step)
    features = list(features)

    labels = np.array([1.0] * len(positives) + [-1.0] * len(negatives))
    values = feature_matrix(windows, features)
    order = np.argsort(values, axis=0, kind="mergesort")
    sorted_vals = np.take_along_axis(values, order, axis=0)
    order = np.ascontiguousarray(order, dtype=np.int64)
    sorted_vals = np.ascontiguousarray(sorted_vals)

    n = len(windows)
    weights = np.full(n, 1.0 / n)
    result = BoostResult(stumps=[])
    for _ in range(rounds):
        f, i, polarity, err = kernels.best_stump(sorted_vals, order, labels, weights)
        if f < 0 or err >= 0.5:
            result.degenerate = not result.stumps
            break
        threshold = 0.5 * (sorted_vals[i, f] + sorted_vals[i + 1, f])
        eps = max(err, _MIN_STUMP_ERROR)
        alpha = 0.5 * math.log((1.0 - eps) / eps)
        result.weights.append(weights.copy())
        result.errors.append(float(err))
        result.stumps.append(StumpClassifier(features[f], float(threshold), int(polarity), alpha))
        if err <= 0.0:
            break
        pred = np.where(polarity * (values[:, f] - threshold) > 0, 1.0, -1.0)
        weights = weights * np.exp(-alpha * labels * pred)
        weights = weights / weights.sum()
    return result


def strong_scores(stumps, values: np.ndarray, feature_index) -> np.ndarray:
    """Face-vote totals for rows of a precomputed feature matrix."""
    total = np.zeros(values.shape[0])
    for s in stumps:
        col = values[:, feature_index[s.feature]]
        total += np.where(s.polarity * (col - s.threshold) > 0, s.alpha, 0.0)
    return total


def training_error(stumps, positives, negatives) -> float:
    """Fraction of training windows the strong classifier gets wrong."""
    stumps = list(stumps)
    windows = [_as_array(w) for w in list(positives) + list(negatives)]
    labels = np.array([1] * len(positives) + [-1] * len(negatives))
    if not stumps:
        return float(np.mean(labels > 0))
    feats = list(dict.fromkeys(s.feature for s in stumps))
    values = feature_matrix(windows, feats)
    index = {f: i for i, f in enumerate(feats)}
    votes = strong_scores(stumps, values, index)
    half = 0.5 * sum(s.alpha for s in stumps)
    pred = np.where(votes >= half, 1, -1)
    return float(np.mean(pred != labels))


# -- detection -------------------------------------------------------------------

@dataclass(frozen=True)
class Detection:
    x: int
    y: int
    size: int
    score: float

    def iou(self, other: "Detection") -> float:
        ix = max(0, min(self.x + self.size, other.x + other.size) - max(self.x, other.x))
        iy = max(0, min(self.y + self.size, other.y + other.size) - max(self.y, other.y))
        inter = ix * iy
        union = self.size ** 2 + other.size ** 2 - inter
        return inter / union if union else 0.0


def detect(img, ensemble, window: int, stride: int = 1, scales=(1.0,), iou_threshold: float = 0.5) -> list[Detection]:
    """Slide the strong classifier over ``img`` at each scale.

    A window fires when its face-vote total reaches half the summed alphas.
    Feature values at scale s are divided by the white-area growth so the
    scale-1 thresholds still apply. Overlapping hits (IoU above the
    threshold) keep only the highest score; ``score`` is the vote fraction.
    """
    stumps = list(ensemble)
    if not stumps:
        raise ValueError("detect needs a non-empty ensemble")
    ii = integral_image(img)
    table = ii.table.astype(np.float64)
    alphas = np.array([s.alpha for s in stumps])
    half = 0.5 * alphas.sum()
    thresholds = np.array([s.threshold for s in stumps])
    polarities = np.array([float(s.polarity) for s in stumps])
    hits = []
    for scale in scales:
        side = _round_half_up(window * scale)
        if side < 1 or side > ii.width or side > ii.height:
            continue
        try:
            rx, ry, rw, rh, rwt, white = _pack([s.feature for s in stumps], scale)
        except OutOfBounds:
            continue
        base_white = _pack([s.feature for s in stumps])[5]
        norm = base_white / white
        ys, xs = np.mgrid[0:ii.height - side + 1:stride, 0:ii.width - side + 1:stride]
        ox = np.ascontiguousarray(xs.ravel(), dtype=np.int64)
        oy = np.ascontiguousarray(ys.ravel(), dtype=np.int64)
        # scaled rectangles may poke one pixel past the scaled window after rounding
        reach_x = int((rx + rw).max())
        reach_y = int((ry + rh).max())
        keep = (ox + reach_x <= ii.width) & (oy + reach_y <= ii.height)
        ox, oy = ox[keep], oy[keep]
        votes = kernels.window_votes(table, ox, oy, rx, ry, rw, rh, rwt, norm, thresholds, polarities, alphas)
        for p in np.nonzero(votes >= half)[0]:
            hits.append(Detection(int(ox[p]), int(oy[p]), side, float(votes[p] / alphas.sum())))
    return non_max_suppression(hits, iou_threshold)


def non_max_suppression(hits, iou_threshold: float = 0.5) -> list[Detection]:
    ranked = sorted(hits, key=lambda d: (-d.score, d.size, d.y, d.x))
    kept: list[Detection] = []
    for d in ranked:
        if all(d.iou(k) <= iou_threshold for k in kept):
            kept.append(d)
    return kept


# -- persistence -----------------------------------------------------------------

def format_stump(s: StumpClassifier) -> str:
    f = s.feature
    return (f"stump {f.kind} {f.x} {f.y} {f.w} {f.h} {f.window} "
            f"{s.threshold:.17g} {s.polarity:d} {s.alpha:.17g}")


def parse_stump(line: str) -> StumpClassifier:
    parts = line.split()
    if len(parts) != 10 or parts[0] != "stump":
        raise ValueError(f"bad stump line: {line!r}")
    kind = parts[1]
    x, y, w, h, window = (int(p) for p in parts[2:7])
    polarity = int(parts[8])
    if polarity not in (-1, 1):
        raise ValueError(f"bad stump polarity in {line!r}")
    return StumpClassifier(HaarFeature(kind, x, y, w, h, window), float(parts[7]), polarity, float(parts[9]))
