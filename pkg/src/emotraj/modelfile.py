"""Versioned line-oriented text format for trained pipelines.

Layout, one keyed section per line::

    EMMODEL 1
    size <W> <H>
    L <frames>
    M <training faces>
    K <k>
    D <d>
    E <e>
    centering on|off
    emotions <name> ...
    mean <h*w floats>
    eigenvalues <K floats>
    eigenface <i> <h*w floats>          (K lines)
    directions <i_1> ... <i_D>
    dscores <D floats>
    scaler <d> <lo> <hi>                 (D lines)
    poly <e> <d> <L+1 floats>            (E*D lines, leading 1 first)
    detector <window>                    (optional, then stump lines)
    stump <kind> <x> <y> <w> <h> <window> <threshold> <polarity> <alpha>
    end

Floats use 17 significant digits, which round-trips every double exactly.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .discriminator import DirectionSelection
from .eigenspace import EigenModel
from .errors import IoError, UnreadableModel, VersionMismatch
from .haarlite import format_stump, parse_stump
from .pipeline import TrainedPipeline
from .trajectory import DirectionScaler, EmotionPolynomialModel

MAGIC = "EMMODEL"
VERSION = 1


def _floats(values) -> str:
    return " ".join(f"{float(v):.17g}" for v in np.ravel(values))


def dumps(p: TrainedPipeline) -> str:
    eig, poly = p.eigen, p.poly
    for name in poly.emotions:
        if not name or any(ch.isspace() for ch in name):
            raise ValueError(f"emotion name {name!r} cannot be stored (empty or contains whitespace)")
    w, h = p.canonical_size
    lines = [
        f"{MAGIC} {VERSION}",
        f"size {w} {h}",
        f"L {p.length}",
        f"M {eig.n_train}",
        f"K {eig.k}",
        f"D {len(poly.directions.indices)}",
        f"E {len(poly.emotions)}",
        f"centering {'on' if eig.centering else 'off'}",
        "emotions " + " ".join(poly.emotions),
        "mean " + _floats(eig.mean),
        "eigenvalues " + _floats(eig.eigenvalues),
    ]
    lines += [f"eigenface {i} " + _floats(u) for i, u in enumerate(eig.eigenfaces)]
    lines.append("directions " + " ".join(str(i) for i in poly.directions.indices))
    lines.append("dscores " + _floats(poly.directions.scores))
    lines += [f"scaler {d} {s.lo:.17g} {s.hi:.17g}" for d, s in enumerate(poly.scalers)]
    for e in range(len(poly.emotions)):
        for d in range(len(poly.directions.indices)):
            lines.append(f"poly {e} {d} " + _floats(poly.coefficients[e, d]))
    if p.stumps:
        lines.append(f"detector {p.detector_window}")
        lines += [format_stump(s) for s in p.stumps]
    lines.append("end")
    return "\n".join(lines) + "\n"


class _Reader:
    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.pos = 0

    def next(self, key: str, *, numbered=()) -> list[str]:
        if self.pos >= len(self.lines):
            raise UnreadableModel(f"model file ends before section {key!r}")
        parts = self.lines[self.pos].split()
        self.pos += 1
        if not parts or parts[0] != key:
            raise UnreadableModel(f"line {self.pos}: expected section {key!r}, found {parts[:1]}")
        parts = parts[1:]
        for expect in numbered:
            if not parts or parts[0] != str(expect):
                raise UnreadableModel(f"line {self.pos}: {key} section out of order")
            parts = parts[1:]
        return parts

    def peek(self) -> str:
        return self.lines[self.pos].split()[0] if self.pos < len(self.lines) and self.lines[self.pos].split() else ""


def _ints(parts, n, where):
    if len(parts) != n:
        raise UnreadableModel(f"{where}: expected {n} integers, got {len(parts)}")
    return [int(p) for p in parts]


def _floatarr(parts, n, where):
    if len(parts) != n:
        raise UnreadableModel(f"{where}: expected {n} values, got {len(parts)}")
    return np.array([float(p) for p in parts])


def loads(text: str) -> TrainedPipeline:
    r = _Reader(text)
    try:
        header = r.lines[0].split() if r.lines else []
        if len(header) != 2 or header[0] != MAGIC:
            raise UnreadableModel("not an emotion model file")
        if header[1] != str(VERSION):
            raise VersionMismatch(f"model version {header[1]} is not supported (expected {VERSION})")
        r.pos = 1
        w, h = _ints(r.next("size"), 2, "size")
        (length,) = _ints(r.next("L"), 1, "L")
        (m,) = _ints(r.next("M"), 1, "M")
        (k,) = _ints(r.next("K"), 1, "K")
        (d,) = _ints(r.next("D"), 1, "D")
        (e,) = _ints(r.next("E"), 1, "E")
        centering = r.next("centering")
        if centering not in (["on"], ["off"]):
            raise UnreadableModel(f"bad centering flag {centering}")
        emotions = tuple(r.next("emotions"))
        if len(emotions) != e:
            raise UnreadableModel(f"expected {e} emotion names, got {len(emotions)}")
        n = w * h
        mean = _floatarr(r.next("mean"), n, "mean")
        eigenvalues = _floatarr(r.next("eigenvalues"), k, "eigenvalues")
        faces = np.stack([_floatarr(r.next("eigenface", numbered=(i,)), n, f"eigenface {i}") for i in range(k)])
        directions = tuple(_ints(r.next("directions"), d, "directions"))
        scores = tuple(float(s) for s in _floatarr(r.next("dscores"), d, "dscores"))
        scalers = tuple(DirectionScaler(*_floatarr(r.next("scaler", numbered=(j,)), 2, "scaler")) for j in range(d))
        coeffs = np.empty((e, d, length + 1))
        for i in range(e):
            for j in range(d):
                coeffs[i, j] = _floatarr(r.next("poly", numbered=(i, j)), length + 1, f"poly {i} {j}")
        stumps = []
        window = 0
        if r.peek() == "detector":
            (window,) = _ints(r.next("detector"), 1, "detector")
            while r.peek() == "stump":
                stumps.append(parse_stump(r.lines[r.pos]))
                r.pos += 1
        r.next("end")
        if r.pos != len(r.lines):
            raise UnreadableModel("trailing content after end marker")
        eig = EigenModel(mean, faces, eigenvalues, w, h, m, centering == ["on"])
        selection = DirectionSelection(directions, scores, reduced=k < d)
        poly = EmotionPolynomialModel(emotions, selection, coeffs, scalers)
        return TrainedPipeline((w, h), eig, poly, length, tuple(stumps), window)
    except UnreadableModel:
        raise
    except (ValueError, IndexError) as exc:
        raise UnreadableModel(f"corrupt model file: {exc}") from exc


def save(p: TrainedPipeline, path) -> None:
    try:
        Path(path).write_text(dumps(p))
    except OSError as exc:
        raise IoError(f"cannot write model {path}: {exc}") from exc


def load(path) -> TrainedPipeline:
    try:
        text = Path(path).read_text()
    except FileNotFoundError as exc:
        raise UnreadableModel(f"model file not found: {path}") from exc
    except (OSError, UnicodeDecodeError) as exc:
        raise UnreadableModel(f"cannot read model {path}: {exc}") from exc
    return loads(text)
