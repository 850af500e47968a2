"""End-to-end training and classification of face sequences."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .discriminator import DEFAULT_D, LabeledTrajectory, select_directions
from .eigenspace import DEFAULT_K, EigenModel, train_pca
from .errors import SingleClass
from .haarlite import StumpClassifier, adaboost_train, enumerate_features
from .imagecore import UNLABELED, DatasetManifest, GrayImage, SequenceRecord, resize, sequence_matrix
from .trajectory import EmotionPolynomialModel, fit_emotion_polynomials


@dataclass(frozen=True, eq=False)
class TrainedPipeline:
    canonical_size: tuple[int, int]
    eigen: EigenModel
    poly: EmotionPolynomialModel
    length: int
    stumps: tuple[StumpClassifier, ...] = field(default_factory=tuple)
    detector_window: int = 0

    @property
    def emotions(self) -> tuple[str, ...]:
        return self.poly.emotions

    def trajectory(self, frames: np.ndarray) -> np.ndarray:
        return self.eigen.project_sequence(frames)

    def classify_frames(self, frames: np.ndarray) -> tuple[int, np.ndarray]:
        """(emotion index, residuals) for an (L, h*w) stack of face vectors."""
        res = self.poly.residuals(self.trajectory(frames))
        return int(np.argmin(res)), res

    def classify_record(self, record: SequenceRecord) -> tuple[int, np.ndarray]:
        return self.classify_frames(sequence_matrix(record, self.canonical_size))


@dataclass
class TrainingReport:
    effective_k: int
    directions: tuple[int, ...]
    scores: tuple[float, ...]
    reduced: bool
    training_residuals: dict[str, float]


def train_pipeline(manifest: DatasetManifest, k: int = DEFAULT_K, d: int = DEFAULT_D,
                   centering: bool = True, emotions=None) -> tuple[TrainedPipeline, TrainingReport]:
    """align -> PCA -> project -> direction selection -> polynomial fit.

    ``emotions`` defaults to the manifest's configured emotions that occur
    in it, in configured order. Unlabeled sequences are ignored.
    """
    records = [r for r in manifest.records if r.label != UNLABELED]
    labels = {r.label for r in records}
    if emotions is None:
        emotions = tuple(e for e in manifest.emotions if e in labels)
    if len(labels) < 2 or len(emotions) < 2:
        raise SingleClass(f"training needs at least two emotions, found {sorted(labels)}")

    width, height = manifest.canonical_size
    stacks = [sequence_matrix(r, manifest.canonical_size) for r in records]
    eigen = train_pca(np.concatenate(stacks), k, width, height, centering)
    trajs = [LabeledTrajectory(eigen.project_sequence(s), r.label, r.sequence_id) for s, r in zip(stacks, records)]
    selection = select_directions(trajs, d)
    poly = fit_emotion_polynomials(trajs, selection, emotions)

    own = {e: [] for e in emotions}
    for tr in trajs:
        if tr.label in own:
            own[tr.label].append(float(poly.residuals(tr.weights)[emotions.index(tr.label)]))
    report = TrainingReport(
        effective_k=eigen.k,
        directions=selection.indices,
        scores=selection.scores,
        reduced=selection.reduced,
        training_residuals={e: float(np.mean(v)) for e, v in own.items()},
    )
    pipeline = TrainedPipeline(tuple(manifest.canonical_size), eigen, poly, manifest.length)
    return pipeline, report


def detector_windows(faces, window: int, seed: int, negatives_per_face: int = 3):
    """Positive and negative training windows from canonical face images.

    Positives are whole faces shrunk to the window. Negatives are the same
    faces shifted by 3/16, 1/4 or 1/2 of a window (vacated pixels set to zero),
    zoomed-in partial crops, and flat and noise patches, all seeded.
    """
    rng = np.random.default_rng(seed)
    positives, negatives = [], []
    for img in faces:
        face = resize(img, window, window).pixels
        positives.append(face)
        for dx, dy in _shifts(window):
            negatives.append(_shifted(face, dx, dy))
        side_max = min(img.width, img.height)
        for _ in range(negatives_per_face):
            side = int(rng.integers(window, max(window + 1, side_max // 2 + 1)))
            x = int(rng.integers(0, img.width - side + 1))
            y = int(rng.integers(0, img.height - side + 1))
            crop = GrayImage(img.pixels[y:y + side, x:x + side])
            negatives.append(resize(crop, window, window).pixels)
    for level in (0.0, 64.0, 128.0, 192.0, 255.0):
        negatives.append(np.full((window, window), level))
    for _ in range(len(faces)):
        negatives.append(np.floor(rng.uniform(0, 256, size=(window, window))))
    return positives, negatives


def _shifts(window: int):
    near, q = max(1, (3 * window) // 16), max(1, window // 4)
    steps = sorted({-2 * q, -q, -near, 0, near, q, 2 * q})
    return [(dx, dy) for dy in steps for dx in steps if (dx, dy) != (0, 0)]


def _shifted(face: np.ndarray, dx: int, dy: int) -> np.ndarray:
    out = np.zeros_like(face)
    h, w = face.shape
    out[max(0, dy):h + min(0, dy), max(0, dx):w + min(0, dx)] = face[max(0, -dy):h - max(0, dy), max(0, -dx):w - max(0, dx)]
    return out


def train_detector(faces, window: int = 16, rounds: int = 20, seed: int = 0, feature_step: int = 2):
    positives, negatives = detector_windows(faces, window, seed)
    features = enumerate_features(window, step=feature_step)
    return adaboost_train(positives, negatives, rounds, features=features, window=window)
