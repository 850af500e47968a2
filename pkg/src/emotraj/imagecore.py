"""Gray images, PGM/PNG decoding, dataset manifests and eye-based alignment."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .errors import (
    BadFrameCount,
    DegenerateEyes,
    DimensionMismatch,
    DuplicateFrameIndex,
    ImageDecodeError,
    IoError,
    ManifestFormatError,
    MissingFile,
    OutOfBounds,
    UnknownLabel,
)

DEFAULT_EMOTIONS = ("anger", "happiness", "sorrow", "surprise")
UNLABELED = "unlabeled"
SEQUENCE_LENGTH = 8
DEFAULT_CANONICAL = (64, 64)

# Canonical eye anchors as fractions of (width, height).
LEFT_EYE_ANCHOR = (0.3, 0.35)
RIGHT_EYE_ANCHOR = (0.7, 0.35)
MIN_EYE_DISTANCE = 2.0

MANIFEST_COLUMNS = ("path", "sequence_id", "frame_index", "label", "eye_lx", "eye_ly", "eye_rx", "eye_ry")


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Grayscale raster; ``pixels`` is a read-only (height, width) float64 array."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.array(self.pixels, dtype=np.float64, copy=True)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionMismatch(f"image must be a non-empty 2-D array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("image contains non-finite intensities")
        if arr.min() < 0.0 or arr.max() > 255.0:
            raise ValueError("image intensities must lie in [0, 255]")
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def size(self) -> tuple[int, int]:
        return self.width, self.height

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(np.array_equal(self.pixels, other.pixels))

    def __hash__(self):
        return hash((self.pixels.shape, self.pixels.tobytes()))


def image_to_vector(img: GrayImage) -> np.ndarray:
    """Row-major flattening into a face vector of length h*w."""
    return img.pixels.reshape(-1).copy()


def vector_to_image(vec, width: int, height: int) -> GrayImage:
    vec = np.asarray(vec, dtype=np.float64)
    if vec.size != width * height:
        raise DimensionMismatch(f"vector of length {vec.size} cannot form a {width}x{height} image")
    return GrayImage(vec.reshape(height, width))


# -- decoding ------------------------------------------------------------------

def _pgm_tokens(data: bytes, count: int):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    tokens = []
    pos = 0
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos < n and data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ImageDecodeError("truncated PGM header")
        tokens.append(data[start:pos])
    # exactly one whitespace byte separates the header from the raster
    return tokens, pos + 1


def decode_pgm(data: bytes) -> GrayImage:
    tokens, offset = _pgm_tokens(data, 4)
    if tokens[0] != b"P5":
        raise ImageDecodeError(f"not a binary PGM (magic {tokens[0]!r})")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise ImageDecodeError("malformed PGM header") from exc
    if width < 1 or height < 1 or not 0 < maxval < 256:
        raise ImageDecodeError(f"unsupported PGM geometry {width}x{height} maxval {maxval}")
    raster = data[offset:offset + width * height]
    if len(raster) != width * height:
        raise ImageDecodeError("truncated PGM raster")
    pixels = np.frombuffer(raster, dtype=np.uint8).reshape(height, width).astype(np.float64)
    if maxval != 255:
        pixels = pixels * (255.0 / maxval)
    return GrayImage(pixels)


def encode_pgm(img: GrayImage) -> bytes:
    """8-bit binary PGM; intensities rounded half-up and clipped."""
    raster = np.clip(np.floor(img.pixels + 0.5), 0, 255).astype(np.uint8)
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + raster.tobytes()


def _decode_png(path: Path) -> GrayImage:
    try:
        from PIL import Image
    except ImportError as exc:
        raise ImageDecodeError(f"{path}: PNG support requires Pillow") from exc
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode == "L":
                arr = np.asarray(im, dtype=np.float64)
            else:
                rgb = np.asarray(im.convert("RGB"), dtype=np.float64)
                arr = np.floor(rgb.mean(axis=2) + 0.5)
    except OSError as exc:
        raise ImageDecodeError(f"{path}: {exc}") from exc
    return GrayImage(arr)


def read_image(path) -> GrayImage:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"image not found: {path}")
    if path.suffix.lower() == ".png":
        return _decode_png(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    try:
        return decode_pgm(data)
    except ImageDecodeError as exc:
        raise ImageDecodeError(f"{path}: {exc}") from exc


def write_pgm(img: GrayImage, path) -> None:
    try:
        Path(path).write_bytes(encode_pgm(img))
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


# -- alignment -------------------------------------------------------------------

def canonical_eyes(width: int, height: int) -> tuple[tuple[float, float], tuple[float, float]]:
    return (
        (LEFT_EYE_ANCHOR[0] * width, LEFT_EYE_ANCHOR[1] * height),
        (RIGHT_EYE_ANCHOR[0] * width, RIGHT_EYE_ANCHOR[1] * height),
    )


def eye_similarity(eye_left, eye_right, canonical) -> np.ndarray:
    """2x3 affine mapping source coordinates to canonical coordinates.

    Coordinates are (x, y) with pixel centres on integers.
    """
    width, height = canonical
    (dlx, dly), (drx, dry) = canonical_eyes(width, height)
    src_l = complex(*eye_left)
    src_r = complex(*eye_right)
    if abs(src_r - src_l) < MIN_EYE_DISTANCE:
        raise DegenerateEyes(f"eye distance {abs(src_r - src_l):.3g} px is below {MIN_EYE_DISTANCE}")
    z = (complex(drx, dry) - complex(dlx, dly)) / (src_r - src_l)
    shift = complex(dlx, dly) - z * src_l
    return np.array([[z.real, -z.imag, shift.real], [z.imag, z.real, shift.imag]])


def _inverse_similarity(eye_left, eye_right, canonical) -> np.ndarray:
    # canonical -> source, built directly rather than by inverting the forward map
    width, height = canonical
    (dlx, dly), (drx, dry) = canonical_eyes(width, height)
    src_l = complex(*eye_left)
    src_r = complex(*eye_right)
    z = (src_r - src_l) / (complex(drx, dry) - complex(dlx, dly))
    shift = src_l - z * complex(dlx, dly)
    return np.array([[z.real, -z.imag, shift.real], [z.imag, z.real, shift.imag]])


def align_face(img: GrayImage, eye_left, eye_right, canonical=DEFAULT_CANONICAL) -> GrayImage:
    """Warp ``img`` so the eyes land on the canonical anchors.

    Uses the similarity transform (rotation, uniform scale, translation)
    fixed by the two eye correspondences, bilinear resampling and zero fill
    outside the source.
    """
    for name, (ex, ey) in (("left", eye_left), ("right", eye_right)):
        if not (0.0 <= ex <= img.width - 1 and 0.0 <= ey <= img.height - 1):
            raise OutOfBounds(f"{name} eye ({ex}, {ey}) lies outside the {img.width}x{img.height} image")
    if math.dist(eye_left, eye_right) < MIN_EYE_DISTANCE:
        raise DegenerateEyes(f"eye distance {math.dist(eye_left, eye_right):.3g} px is below {MIN_EYE_DISTANCE}")
    width, height = canonical
    inv = _inverse_similarity(eye_left, eye_right, canonical)
    out = kernels.warp_bilinear(img.pixels, inv, int(height), int(width))
    return GrayImage(np.clip(out, 0.0, 255.0))


def resize(img: GrayImage, width: int, height: int) -> GrayImage:
    """Bilinear resize mapping corner pixel centres onto corner pixel centres."""
    sx = (img.width - 1) / (width - 1) if width > 1 else 0.0
    sy = (img.height - 1) / (height - 1) if height > 1 else 0.0
    affine = np.array([[sx, 0.0, 0.0], [0.0, sy, 0.0]])
    return GrayImage(np.clip(kernels.warp_bilinear(img.pixels, affine, height, width), 0.0, 255.0))


# -- manifests -------------------------------------------------------------------

@dataclass(frozen=True)
class SequenceRecord:
    sequence_id: str
    label: str
    frames: tuple[Path, ...]
    eye_left: tuple | None = None   # per-frame (x, y) or None
    eye_right: tuple | None = None

    def __post_init__(self):
        if self.eye_left is not None:
            for (lx, _), (rx, _) in zip(self.eye_left, self.eye_right):
                if not lx < rx:
                    raise ManifestFormatError(f"sequence {self.sequence_id}: eye_lx must be < eye_rx")

    @property
    def has_eyes(self) -> bool:
        return self.eye_left is not None


@dataclass(frozen=True)
class DatasetManifest:
    records: tuple[SequenceRecord, ...]
    canonical_size: tuple[int, int] = DEFAULT_CANONICAL
    emotions: tuple[str, ...] = DEFAULT_EMOTIONS
    length: int = SEQUENCE_LENGTH

    def labels(self) -> list[str]:
        return [r.label for r in self.records]

    def subset(self, records) -> "DatasetManifest":
        return DatasetManifest(tuple(records), self.canonical_size, self.emotions, self.length)

    def __len__(self):
        return len(self.records)


def _parse_coord(row, key, where):
    text = (row.get(key) or "").strip()
    if not text:
        return None
    try:
        return float(text)
    except ValueError as exc:
        raise ManifestFormatError(f"{where}: column {key} is not a number: {text!r}") from exc


def load_manifest(path, emotions=DEFAULT_EMOTIONS, length=SEQUENCE_LENGTH,
                  canonical_size=DEFAULT_CANONICAL) -> DatasetManifest:
    """Parse and validate a manifest CSV.

    Image paths are resolved relative to the manifest's directory. Sequences
    keep the order of their first appearance; frame order comes only from
    the ``frame_index`` column.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"manifest not found: {path}")
    root = path.parent
    allowed = set(emotions) | {UNLABELED}
    groups: dict[str, dict] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(h.strip() for h in reader.fieldnames) != MANIFEST_COLUMNS:
            raise ManifestFormatError(f"{path}: header must be {','.join(MANIFEST_COLUMNS)}")
        for lineno, row in enumerate(reader, start=2):
            where = f"{path}:{lineno}"
            seq = (row["sequence_id"] or "").strip()
            label = (row["label"] or "").strip()
            if not seq:
                raise ManifestFormatError(f"{where}: empty sequence_id")
            if label not in allowed:
                raise UnknownLabel(f"{where}: label {label!r} is not one of {sorted(allowed)}")
            try:
                index = int(row["frame_index"])
            except (TypeError, ValueError) as exc:
                raise ManifestFormatError(f"{where}: bad frame_index {row['frame_index']!r}") from exc
            image_path = root / (row["path"] or "").strip()
            if not image_path.is_file():
                raise MissingFile(f"{where}: image not found: {image_path}")
            coords = [_parse_coord(row, k, where) for k in MANIFEST_COLUMNS[4:]]
            if any(c is None for c in coords) and not all(c is None for c in coords):
                raise ManifestFormatError(f"{where}: eye columns must be all present or all empty")
            group = groups.setdefault(seq, {"label": label, "frames": {}})
            if group["label"] != label:
                raise ManifestFormatError(f"{where}: sequence {seq} mixes labels")
            if index in group["frames"]:
                raise DuplicateFrameIndex(f"{where}: sequence {seq} repeats frame_index {index}")
            group["frames"][index] = (image_path, None if coords[0] is None else coords)

    records = []
    for seq, group in groups.items():
        frames = group["frames"]
        if len(frames) != length:
            raise BadFrameCount(f"sequence {seq} has {len(frames)} frames, expected {length}")
        if sorted(frames) != list(range(length)):
            raise BadFrameCount(f"sequence {seq} frame indices must be 0..{length - 1}")
        ordered = [frames[i] for i in range(length)]
        eyes = [c for _, c in ordered]
        if all(c is not None for c in eyes):
            eye_left = tuple((c[0], c[1]) for c in eyes)
            eye_right = tuple((c[2], c[3]) for c in eyes)
        elif all(c is None for c in eyes):
            eye_left = eye_right = None
        else:
            raise ManifestFormatError(f"sequence {seq}: eye coordinates given for some frames only")
        records.append(SequenceRecord(seq, group["label"], tuple(p for p, _ in ordered), eye_left, eye_right))
    return DatasetManifest(tuple(records), tuple(canonical_size), tuple(emotions), length)


def write_manifest(manifest: DatasetManifest, path) -> None:
    """Write ``manifest`` as CSV with paths relative to the file's directory."""
    path = Path(path)
    root = path.parent.resolve()
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(MANIFEST_COLUMNS)
            for rec in manifest.records:
                for t, frame in enumerate(rec.frames):
                    try:
                        rel = Path(frame).resolve().relative_to(root)
                    except ValueError:
                        rel = Path(frame).resolve()
                    eyes = ["", "", "", ""]
                    if rec.has_eyes:
                        eyes = [repr(float(v)) for v in (*rec.eye_left[t], *rec.eye_right[t])]
                    writer.writerow([rel.as_posix(), rec.sequence_id, t, rec.label, *eyes])
    except OSError as exc:
        raise IoError(f"cannot write manifest {path}: {exc}") from exc


def load_sequence(record: SequenceRecord, canonical=DEFAULT_CANONICAL) -> list[GrayImage]:
    """Decode a record's frames and bring them to canonical geometry.

    Frames with eye coordinates are aligned; frames without must already be
    canonical size.
    """
    images = []
    for t, frame in enumerate(record.frames):
        img = read_image(frame)
        if record.has_eyes:
            img = align_face(img, record.eye_left[t], record.eye_right[t], canonical)
        elif img.size != tuple(canonical):
            raise DimensionMismatch(
                f"{frame}: {img.width}x{img.height} frame has no eye coordinates and is not "
                f"canonical size {canonical[0]}x{canonical[1]}"
            )
        images.append(img)
    return images


def sequence_matrix(record: SequenceRecord, canonical=DEFAULT_CANONICAL) -> np.ndarray:
    """(L, h*w) array of face vectors for one record."""
    return np.stack([image_to_vector(img) for img in load_sequence(record, canonical)])
