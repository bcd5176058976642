"""Synthetic ghost-imaging pipeline: pattern lifting, bucket samples,
correlation reconstruction, image metrics and binary PGM I/O."""
from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, DimensionError, NegativityError, PgmFormatError, PhysicalityError, ValidationError
from .linalg import as_matrix, as_vector

IDENTICAL = "identical"
PEAK = 255.0


@dataclass(frozen=True)
class ObjectImage:
    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=float)
        if px.ndim != 2 or 0 in px.shape:
            raise DimensionError(f"image must be a non-empty 2-D array, got {px.shape}")
        if not np.all(np.isfinite(px)) or px.min() < 0:
            raise ValidationError("image pixels must be finite and nonnegative")
        object.__setattr__(self, "pixels", px)

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def width(self):
        return self.pixels.shape[1]

    def vector(self):
        return self.pixels.ravel().copy()

    @classmethod
    def from_vector(cls, x, height, width):
        return cls(np.asarray(x, dtype=float).reshape(height, width))


@dataclass(frozen=True)
class LiftedSystem:
    psi0: np.ndarray
    c0: float
    base: np.ndarray


def lift_nonnegative(psi, c0=None):
    """Add ``c0`` to every entry so the patterns become physically realisable.

    The default is the tightest lift, ``max(0, -min(psi))``.
    """
    psi = as_matrix(psi, "Psi")
    lo = float(psi.min())
    if c0 is None:
        c0 = max(0.0, -lo)
    psi0 = psi + float(c0)
    if psi0.min() < 0:
        i, j = np.unravel_index(np.argmin(psi0), psi0.shape)
        raise NegativityError(i, j, psi0[i, j])
    return LiftedSystem(psi0=psi0, c0=float(c0), base=psi)


def split_nonnegative(psi):
    """Write ``psi = plus - minus`` with both parts nonnegative and disjointly supported."""
    psi = as_matrix(psi, "Psi")
    return np.maximum(psi, 0.0), np.maximum(-psi, 0.0)


def bucket_sample(psi0, x):
    psi0 = as_matrix(psi0, "Psi0")
    x = as_vector(x, psi0.shape[1], "x")
    if psi0.min() < 0:
        i, j = np.unravel_index(np.argmin(psi0), psi0.shape)
        raise PhysicalityError(f"pattern entry ({i}, {j}) = {psi0[i, j]:.6g} is negative")
    return psi0 @ x


def gi_correlate(psi0, y0):
    """Correlate pattern fluctuations with bucket fluctuations."""
    psi0 = as_matrix(psi0, "Psi0")
    y0 = as_vector(y0, psi0.shape[0], "y0")
    if psi0.shape[0] < 2:
        raise DegenerateInputError("fluctuation statistics need at least two samples")
    return (psi0 - psi0.mean(axis=0)).T @ (y0 - y0.mean())


def rescale_minmax(x, peak=PEAK):
    """Map ``x`` affinely onto ``[0, peak]``; a constant input maps to zeros."""
    x = np.asarray(x, dtype=float)
    lo, hi = x.min(), x.max()
    if hi - lo <= 0:
        return np.zeros_like(x)
    return (x - lo) * (peak / (hi - lo))


def _pixels(a):
    return a.pixels if isinstance(a, ObjectImage) else np.asarray(a, dtype=float)


def mse(a, b):
    a, b = _pixels(a), _pixels(b)
    if a.shape != b.shape:
        raise DimensionError(f"image shapes differ: {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def psnr(a, b):
    """Peak signal-to-noise ratio in dB against a 255 peak, or ``IDENTICAL`` when MSE is 0."""
    err = mse(a, b)
    if err == 0:
        return IDENTICAL
    return 20.0 * math.log10(PEAK / math.sqrt(err))


# --- binary PGM (P5, maxval 255) -------------------------------------------------


def _header_tokens(data, count):
    tokens = []
    pos = 0
    while len(tokens) < count:
        while pos < len(data) and (data[pos:pos + 1].isspace() or data[pos:pos + 1] == b"#"):
            if data[pos:pos + 1] == b"#":
                end = data.find(b"\n", pos)
                pos = len(data) if end < 0 else end + 1
            else:
                pos += 1
        if pos >= len(data):
            raise PgmFormatError("truncated header", pos)
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append((data[start:pos], start))
    if pos >= len(data):
        raise PgmFormatError("missing whitespace after maxval", pos)
    return tokens, pos + 1


def parse_pgm(data):
    data = bytes(data)
    if data[:2] != b"P5":
        raise PgmFormatError(f"unsupported format {data[:2]!r}, expected b'P5'", 0)
    tokens, offset = _header_tokens(data, 4)
    values = []
    for tok, at in tokens[1:]:
        if not tok.isdigit():
            raise PgmFormatError(f"expected a decimal integer, got {tok!r}", at)
        values.append(int(tok))
    width, height, maxval = values
    if width < 1 or height < 1:
        raise PgmFormatError(f"bad dimensions {width}x{height}", tokens[1][1])
    if maxval != 255:
        raise PgmFormatError(f"maxval {maxval} unsupported, expected 255", tokens[3][1])
    need = width * height
    if len(data) - offset < need:
        raise PgmFormatError(f"payload has {len(data) - offset} bytes, expected {need}", len(data))
    px = np.frombuffer(data, dtype=np.uint8, count=need, offset=offset)
    return ObjectImage(px.reshape(height, width).astype(float))


def load_pgm(path):
    with open(path, "rb") as fh:
        return parse_pgm(fh.read())


def encode_pgm(image):
    px = _pixels(image)
    if px.min() < 0 or px.max() > 255 or not np.array_equal(px, np.round(px)):
        raise ValidationError("PGM output needs integer pixels in [0, 255]")
    h, w = px.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + px.astype(np.uint8).tobytes()


def save_pgm(image, path):
    with open(path, "wb") as fh:
        fh.write(encode_pgm(image))


# --- synthetic objects ---------------------------------------------------------

_DIGIT_3 = """
............................
............................
............................
............................
..........#######...........
.........#.......#..........
.................#..........
.................#..........
.................#..........
................#...........
..............##............
............##..............
..............##............
................#...........
.................#..........
.................#..........
.................#..........
.........#.......#..........
..........#######...........
............................
"""

_DIGIT_7 = """
............................
............................
............................
............................
.........##########.........
..................#.........
.................#..........
.................#..........
................#...........
................#...........
...............#............
...............#............
..............#.............
..............#.............
.............#..............
.............#..............
............#...............
............#...............
............................
"""


def _from_ascii(art, size=28):
    rows = [r for r in art.strip("\n").splitlines()]
    img = np.zeros((size, size))
    for i, row in enumerate(rows):
        for j, ch in enumerate(row):
            if ch == "#":
                img[i, j] = PEAK
    return img


def _taichi(size=28):
    # outline circle plus the S-curve and the two dots
    yy, xx = np.mgrid[0:size, 0:size] + 0.5
    c = size / 2.0
    rad = np.hypot(yy - c, xx - c)
    ring = np.abs(rad - 9.0) < 0.5
    upper = (np.abs(np.hypot(yy - (c - 4.5), xx - c) - 4.5) < 0.5) & (xx >= c)
    lower = (np.abs(np.hypot(yy - (c + 4.5), xx - c) - 4.5) < 0.5) & (xx < c)
    dots = (np.hypot(yy - (c - 4.5), xx - c) < 1.0) | (np.hypot(yy - (c + 4.5), xx - c) < 1.0)
    return np.where(ring | upper | lower | dots, PEAK, 0.0)


def synthetic_objects():
    """Two-valued 28x28 test objects keyed by name."""
    return {
        "digit3": ObjectImage(_from_ascii(_DIGIT_3)),
        "digit7": ObjectImage(_from_ascii(_DIGIT_7)),
        "taichi": ObjectImage(_taichi()),
    }


def write_synthetic_objects(directory):
    os.makedirs(directory, exist_ok=True)
    paths = {}
    for name, img in synthetic_objects().items():
        paths[name] = os.path.join(directory, f"{name}.pgm")
        save_pgm(img, paths[name])
    return paths
