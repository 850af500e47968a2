"""Eigenface training through the small Gram matrix, and projection."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DegenerateData, DimensionMismatch

DEFAULT_K = 50
EIGEN_CUTOFF = 1e-10        # relative to the largest eigenvalue
JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class EigenModel:
    """Mean face and orthonormal eigenfaces.

    ``eigenfaces`` is (K, h*w), one unit vector per row, in descending
    eigenvalue order. ``eigenvalues`` are those of A^T A / M, where the
    columns of A are the mean-centred training faces.
    """

    mean: np.ndarray
    eigenfaces: np.ndarray
    eigenvalues: np.ndarray
    face_width: int
    face_height: int
    n_train: int
    centering: bool = True

    def __post_init__(self):
        for name in ("mean", "eigenfaces", "eigenvalues"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))
        n = self.face_width * self.face_height
        if self.mean.shape != (n,) or self.eigenfaces.ndim != 2 or self.eigenfaces.shape[1] != n:
            raise DimensionMismatch("eigenface shapes do not match the face size")
        if self.eigenvalues.shape != (self.eigenfaces.shape[0],):
            raise DimensionMismatch("one eigenvalue per eigenface required")

    @property
    def k(self) -> int:
        return self.eigenfaces.shape[0]

    @property
    def singular_values(self) -> np.ndarray:
        return np.sqrt(self.n_train * self.eigenvalues)

    def _check(self, face) -> np.ndarray:
        face = np.asarray(face, dtype=np.float64)
        if face.shape[-1] != self.mean.shape[0]:
            raise DimensionMismatch(f"face vector length {face.shape[-1]} != {self.mean.shape[0]}")
        return face

    def project(self, face) -> np.ndarray:
        face = self._check(face)
        if self.centering:
            face = face - self.mean
        return self.eigenfaces @ face

    def project_sequence(self, frames) -> np.ndarray:
        """(K, L) weight trajectory; column t is the projection of frame t."""
        frames = self._check(np.atleast_2d(frames))
        if self.centering:
            frames = frames - self.mean
        return self.eigenfaces @ frames.T

    def reconstruct(self, weights) -> np.ndarray:
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape[0] != self.k:
            raise DimensionMismatch(f"expected {self.k} weights, got {weights.shape[0]}")
        face = self.eigenfaces.T @ weights
        return face + self.mean if self.centering else face


def project(model: EigenModel, face) -> np.ndarray:
    return model.project(face)


def project_sequence(model: EigenModel, frames) -> np.ndarray:
    return model.project_sequence(frames)


def gram_eigh(gram: np.ndarray):
    """Descending eigenpairs of a symmetric matrix via cyclic Jacobi."""
    vals, vecs, _ = kernels.jacobi_eigh(np.ascontiguousarray(gram, dtype=np.float64), JACOBI_TOL, JACOBI_MAX_SWEEPS)
    order = np.argsort(-vals, kind="stable")
    return vals[order], vecs[:, order]


def fix_sign(vectors: np.ndarray) -> np.ndarray:
    """Flip rows so each one's largest-magnitude entry is positive."""
    vectors = np.array(vectors, dtype=np.float64, copy=True)
    peaks = np.argmax(np.abs(vectors), axis=1)
    signs = np.sign(vectors[np.arange(vectors.shape[0]), peaks])
    signs[signs == 0] = 1.0
    return vectors * signs[:, None]


def train_pca(faces, k: int = DEFAULT_K, width: int | None = None, height: int | None = None,
              centering: bool = True) -> EigenModel:
    """Eigenfaces from M training face vectors.

    Works on the M x M Gram matrix A^T A rather than the hw x hw covariance,
    maps each eigenvector back with u = A v and normalizes. Directions with
    eigenvalue below ``EIGEN_CUTOFF`` times the largest are dropped, so the
    returned model may hold fewer than ``k`` eigenfaces.
    """
    lengths = {np.shape(f) for f in faces}
    if len(lengths) > 1:
        raise DimensionMismatch(f"faces must share one length, got {sorted(lengths)}")
    faces = np.asarray(faces, dtype=np.float64)
    if faces.ndim != 2:
        raise DimensionMismatch("faces must be a list of 1-d vectors")
    m, n = faces.shape
    if m < 2:
        raise DegenerateData("PCA needs at least two faces")
    if not 1 <= k:
        raise ValueError("k must be >= 1")
    if width is None or height is None:
        side = int(round(np.sqrt(n)))
        if side * side != n:
            raise DimensionMismatch("pass width and height for non-square faces")
        width = height = side
    if width * height != n:
        raise DimensionMismatch(f"{width}x{height} does not match face length {n}")
    k = min(k, m)

    mean = faces.mean(axis=0)
    a = (faces - mean).T                     # hw x M, columns are centred faces
    gram = a.T @ a
    vals, vecs = gram_eigh(gram)
    lam = vals / m

    # identical faces leave only rounding noise in the centred data
    floor = n * (1e-10 * max(1.0, float(np.abs(faces).max()))) ** 2
    if not np.isfinite(lam[0]) or lam[0] <= floor:
        raise DegenerateData("all faces are identical; the covariance vanishes")
    keep = np.nonzero(lam >= EIGEN_CUTOFF * lam[0])[0][:k]

    u = a @ vecs[:, keep]                     # columns u_i = A v_i
    u = u / np.linalg.norm(u, axis=0)
    # one Gram-Schmidt pass in eigenvalue order removes drift from small sigmas
    for j in range(u.shape[1]):
        for i in range(j):
            u[:, j] -= (u[:, i] @ u[:, j]) * u[:, i]
        u[:, j] /= np.linalg.norm(u[:, j])
    eigenfaces = fix_sign(u.T)
    return EigenModel(mean, eigenfaces, np.maximum(lam[keep], 0.0), width, height, m, centering)
