"""Seeded synthetic face sequences for end-to-end checks.

A neutral face is drawn as a sum of smooth Gaussian blobs (face oval, eyes,
brows, nose, mouth). Each emotion moves or reshapes a different group of
blobs; the resulting intensity change is Gram-Schmidt orthogonalized
against the previous emotions' and rescaled to a common norm. Frame t of a
sequence is ``base + gain * t / (L - 1) * field + noise``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import IoError
from .imagecore import (
    DEFAULT_EMOTIONS,
    SEQUENCE_LENGTH,
    DatasetManifest,
    GrayImage,
    SequenceRecord,
    canonical_eyes,
    write_manifest,
    write_pgm,
)

# Blob parameters in fractions of (W, H): cx, cy, sx, sy, amplitude.
_NEUTRAL = {
    "oval": (0.50, 0.52, 0.30, 0.42, 130.0),
    "eye_l": (0.30, 0.35, 0.055, 0.030, -80.0),
    "eye_r": (0.70, 0.35, 0.055, 0.030, -80.0),
    "brow_l": (0.29, 0.26, 0.075, 0.016, -60.0),
    "brow_r": (0.71, 0.26, 0.075, 0.016, -60.0),
    "nose": (0.50, 0.53, 0.030, 0.070, -25.0),
    "mouth": (0.50, 0.73, 0.090, 0.020, -70.0),
    "corner_l": (0.385, 0.73, 0.025, 0.020, -50.0),
    "corner_r": (0.615, 0.73, 0.025, 0.020, -50.0),
}
_BACKGROUND = 40.0


def _anger(p):
    p["brow_l"] = _move(p["brow_l"], 0.035, 0.04)
    p["brow_r"] = _move(p["brow_r"], -0.035, 0.04)


def _happiness(p):
    p["corner_l"] = _move(p["corner_l"], -0.03, -0.05)
    p["corner_r"] = _move(p["corner_r"], 0.03, -0.05)


def _sorrow(p):
    for k in ("eye_l", "eye_r"):
        cx, cy, sx, sy, a = p[k]
        p[k] = (cx, cy, sx * 1.1, sy * 0.45, a)


def _surprise(p):
    cx, cy, sx, sy, a = p["mouth"]
    p["mouth"] = (cx, cy + 0.01, sx * 0.8, sy * 3.0, a * 1.2)


def _disgust(p):
    cx, cy, sx, sy, a = p["nose"]
    p["nose"] = (cx, cy - 0.03, sx * 1.6, sy * 0.6, a * 1.8)


def _fear(p):
    p["brow_l"] = _move(p["brow_l"], 0.0, -0.04)
    p["brow_r"] = _move(p["brow_r"], 0.0, -0.04)


_PATTERNS = {
    "anger": _anger,
    "happiness": _happiness,
    "sorrow": _sorrow,
    "surprise": _surprise,
    "disgust": _disgust,
    "fear": _fear,
}


def _move(blob, dx, dy):
    cx, cy, sx, sy, a = blob
    return (cx + dx, cy + dy, sx, sy, a)


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 7
    emotions: tuple[str, ...] = DEFAULT_EMOTIONS
    sequences_per_emotion: int = 10
    width: int = 64
    height: int = 64
    noise_sigma: float = 2.0
    deformation_gain: float = 1.0
    length: int = SEQUENCE_LENGTH
    field_norm: float = 600.0

    def __post_init__(self):
        if self.sequences_per_emotion < 2:
            raise ValueError("sequences_per_emotion must be >= 2")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.length < 2:
            raise ValueError("length must be >= 2")
        if len(set(self.emotions)) != len(self.emotions) or len(self.emotions) > len(_PATTERNS):
            raise ValueError(f"need 1..{len(_PATTERNS)} distinct emotion names")


def _render(params, width, height) -> np.ndarray:
    y, x = np.mgrid[0:height, 0:width].astype(np.float64)
    img = np.full((height, width), _BACKGROUND)
    for cx, cy, sx, sy, amp in params.values():
        cx, sx = cx * width, sx * width
        cy, sy = cy * height, sy * height
        img += amp * np.exp(-0.5 * (((x - cx) / sx) ** 2 + ((y - cy) / sy) ** 2))
    return img


def _neutral_params(rng):
    params = {}
    for name, (cx, cy, sx, sy, a) in _NEUTRAL.items():
        j = rng.uniform(0.9, 1.1, size=3)
        if not name.startswith("eye"):
            cx = cx + rng.uniform(-0.01, 0.01)
            cy = cy + rng.uniform(-0.01, 0.01)
        params[name] = (cx, cy, sx * j[0], sy * j[1], a * j[2])
    return params


def _pattern_for(emotions):
    named = [e for e in emotions if e in _PATTERNS]
    spare = [p for p in _PATTERNS if p not in named]
    return {e: _PATTERNS[e] if e in _PATTERNS else _PATTERNS[spare.pop(0)] for e in emotions}


@dataclass
class SynthFaces:
    """In-memory synthetic data: base face, per-emotion fields, frames."""

    config: SynthConfig
    base: np.ndarray
    fields: dict[str, np.ndarray]
    sequences: list[tuple[str, str, list[np.ndarray]]] = field(default_factory=list)


def synthesize(config: SynthConfig) -> SynthFaces:
    """Build every frame in memory (quantized to 8 bits) without touching disk."""
    rng = np.random.default_rng(config.seed)
    w, h = config.width, config.height
    neutral = _neutral_params(rng)
    base = _render(neutral, w, h)

    fields = {}
    basis = []
    for emotion, pattern in _pattern_for(config.emotions).items():
        params = dict(neutral)
        pattern(params)
        delta = (_render(params, w, h) - base).ravel()
        for b in basis:
            delta = delta - (b @ delta) * b
        unit = delta / np.linalg.norm(delta)
        basis.append(unit)
        fields[emotion] = (config.field_norm * unit).reshape(h, w)

    out = SynthFaces(config, base, fields)
    steps = config.length - 1
    for emotion in config.emotions:
        for s in range(config.sequences_per_emotion):
            frames = []
            for t in range(config.length):
                img = base + config.deformation_gain * (t / steps) * fields[emotion]
                if config.noise_sigma > 0:
                    img = img + rng.normal(0.0, config.noise_sigma, size=img.shape)
                frames.append(np.clip(np.floor(img + 0.5), 0, 255))
            out.sequences.append((f"{emotion}_{s:02d}", emotion, frames))
    return out


def generate(config: SynthConfig, out_dir) -> DatasetManifest:
    """Write PGM frames plus ``manifest.csv`` under ``out_dir``."""
    out_dir = Path(out_dir)
    faces = synthesize(config)
    eyes = canonical_eyes(config.width, config.height)
    try:
        (out_dir / "frames").mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {out_dir}: {exc}") from exc
    records = []
    for seq_id, label, frames in faces.sequences:
        paths = []
        for t, frame in enumerate(frames):
            p = out_dir / "frames" / f"{seq_id}_{t}.pgm"
            write_pgm(GrayImage(frame), p)
            paths.append(p)
        records.append(SequenceRecord(seq_id, label, tuple(paths),
                                      (eyes[0],) * config.length, (eyes[1],) * config.length))
    manifest = DatasetManifest(tuple(records), (config.width, config.height), tuple(config.emotions), config.length)
    write_manifest(manifest, out_dir / "manifest.csv")
    return manifest


_CONFIG_KEYS = {
    "seed": int,
    "sequences_per_emotion": int,
    "per_emotion": int,
    "width": int,
    "height": int,
    "noise_sigma": float,
    "deformation_gain": float,
    "gain": float,
    "length": int,
    "field_norm": float,
}


def load_config(path, base: SynthConfig | None = None) -> SynthConfig:
    """Read ``key = value`` lines (``#`` comments) over ``base``."""
    cfg = base or SynthConfig()
    updates = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key == "emotions":
            updates["emotions"] = tuple(v.strip() for v in value.split(",") if v.strip())
        elif key in _CONFIG_KEYS:
            name = {"per_emotion": "sequences_per_emotion", "gain": "deformation_gain"}.get(key, key)
            updates[name] = _CONFIG_KEYS[key](value)
        else:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
    return replace(cfg, **updates)
