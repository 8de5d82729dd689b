"""Raster data model, PGM / RSF1 file I/O and synthetic test scenes.

A :class:`Raster` is an immutable 2D grid of finite float64 intensities,
stored row-major with the origin at the top-left pixel.  Pixel centers sit
at integer coordinates (``x`` = column, ``y`` = row).

Scene synthesis uses NumPy's ``PCG64`` bit generator (via
``numpy.random.default_rng(seed)``) so that every scene is a pure function
of its :class:`SceneSpec`.
"""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import ndimage

__all__ = [
    "Raster",
    "GridTransform",
    "SceneSpec",
    "SCENE_KINDS",
    "RasterFormatError",
    "read_pgm",
    "write_pgm",
    "read_f32",
    "write_f32",
    "synth_scene",
    "feature_mask",
    "scene_background",
    "load",
    "save",
]

RSF_MAGIC = b"RSF1"
_RSF_HEADER = struct.Struct("<4sII")


class RasterFormatError(ValueError):
    """Malformed raster file.  ``offset`` is the byte position of the fault."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


@dataclass(frozen=True, eq=False)
class Raster:
    """Immutable single-band image.

    ``pixels`` is a read-only ``(height, width)`` float64 array.  Use
    :attr:`data` for the flat row-major view.
    """

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.array(self.pixels, dtype=np.float64, copy=True)
        if arr.ndim != 2:
            raise ValueError(f"raster must be 2D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"raster dims must be >= 1, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("raster contains non-finite values")
        arr.flags.writeable = False
        object.__setattr__(self, "pixels", arr)

    @classmethod
    def from_flat(cls, width: int, height: int, data) -> "Raster":
        flat = np.asarray(data, dtype=np.float64).ravel()
        if flat.size != width * height:
            raise ValueError(
                f"data length {flat.size} != width*height = {width * height}"
            )
        return cls(flat.reshape(height, width))

    @classmethod
    def full(cls, width: int, height: int, value: float) -> "Raster":
        return cls(np.full((height, width), value, dtype=np.float64))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape

    @property
    def data(self) -> np.ndarray:
        return self.pixels.ravel()

    def __eq__(self, other):
        if not isinstance(other, Raster):
            return NotImplemented
        return self.shape == other.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )

    __hash__ = None

    def __repr__(self):
        return f"Raster({self.width}x{self.height})"


@dataclass(frozen=True)
class GridTransform:
    """Affine map from output pixel coordinates to source coordinates.

    ``x_src = a*x + b*y + c`` and ``y_src = d*x + e*y + f``.
    """

    a: float = 1.0
    b: float = 0.0
    c: float = 0.0
    d: float = 0.0
    e: float = 1.0
    f: float = 0.0

    def __post_init__(self):
        coeffs = (self.a, self.b, self.c, self.d, self.e, self.f)
        if not all(np.isfinite(v) for v in coeffs):
            raise ValueError("transform coefficients must be finite")

    @property
    def determinant(self) -> float:
        return self.a * self.e - self.b * self.d

    def check_invertible(self) -> None:
        if self.determinant == 0.0:
            raise ValueError(f"non-invertible transform {self}")

    @classmethod
    def identity(cls) -> "GridTransform":
        return cls()

    @classmethod
    def parse(cls, text: str) -> "GridTransform":
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 6:
            raise ValueError(f"transform needs 6 comma-separated values: {text!r}")
        return cls(*(float(p) for p in parts))

    @classmethod
    def scale(cls, factor: float) -> "GridTransform":
        """Center-aligned zoom: each output pixel covers ``factor`` source pixels.

        ``factor > 1`` shrinks the image, ``factor < 1`` enlarges it.
        """
        offset = (factor - 1.0) / 2.0
        return cls(factor, 0.0, offset, 0.0, factor, offset)

    def __call__(self, x, y):
        return (self.a * x + self.b * y + self.c, self.d * x + self.e * y + self.f)


# ---------------------------------------------------------------------------
# PGM

_WS = b" \t\r\n\v\f"


def _pgm_tokens(buf: bytes, count: int, pos: int) -> tuple[list[tuple[bytes, int]], int]:
    """Read ``count`` whitespace-separated header tokens, skipping comments.

    Returns the tokens with their offsets and the position just past the
    last token.
    """
    tokens = []
    n = len(buf)
    while len(tokens) < count:
        while pos < n and buf[pos] in _WS:
            pos += 1
        if pos < n and buf[pos:pos + 1] == b"#":
            while pos < n and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        if pos >= n:
            raise RasterFormatError("truncated PGM header", pos)
        start = pos
        while pos < n and buf[pos] not in _WS and buf[pos:pos + 1] != b"#":
            pos += 1
        tokens.append((buf[start:pos], start))
    return tokens, pos


def _header_int(token: bytes, offset: int, what: str) -> int:
    if not token.isdigit():
        raise RasterFormatError(f"bad PGM {what} {token!r}", offset)
    return int(token)


def read_pgm(stream: Union[bytes, bytearray, memoryview]) -> Raster:
    """Parse a binary (P5) or ASCII (P2) PGM into a normalized raster.

    Samples are divided by maxval so the result lies in [0, 1].
    """
    buf = bytes(stream)
    if len(buf) < 2:
        raise RasterFormatError("truncated PGM magic", 0)
    magic = buf[:2]
    if magic not in (b"P5", b"P2"):
        raise RasterFormatError(f"unsupported magic {magic!r}", 0)
    (w_tok, w_off), (h_tok, h_off), (m_tok, m_off) = _pgm_tokens(buf, 3, 2)[0]
    width = _header_int(w_tok, w_off, "width")
    height = _header_int(h_tok, h_off, "height")
    maxval = _header_int(m_tok, m_off, "maxval")
    if width < 1 or height < 1:
        raise RasterFormatError(f"bad PGM dims {width}x{height}", w_off)
    if maxval == 0 or maxval > 65535:
        raise RasterFormatError(f"maxval {maxval} outside 1..65535", m_off)
    end_of_maxval = m_off + len(m_tok)
    count = width * height

    if magic == b"P5":
        if end_of_maxval >= len(buf) or buf[end_of_maxval] not in _WS:
            raise RasterFormatError("missing whitespace after maxval", end_of_maxval)
        start = end_of_maxval + 1
        depth = 1 if maxval < 256 else 2
        need = count * depth
        if len(buf) - start < need:
            raise RasterFormatError(
                f"truncated payload: need {need} bytes, have {len(buf) - start}",
                len(buf),
            )
        dtype = np.uint8 if depth == 1 else np.dtype(">u2")
        values = np.frombuffer(buf, dtype=dtype, count=count, offset=start)
    else:
        pos = end_of_maxval
        text = buf[pos:]
        items = re.finditer(rb"#[^\r\n]*|[^\s#]+", text)
        samples = []
        for m in items:
            tok = m.group()
            if tok.startswith(b"#"):
                continue
            if not tok.isdigit():
                raise RasterFormatError(f"bad PGM sample {tok!r}", pos + m.start())
            samples.append(int(tok))
            if len(samples) == count:
                break
        if len(samples) < count:
            raise RasterFormatError(
                f"truncated payload: need {count} samples, have {len(samples)}",
                len(buf),
            )
        values = np.asarray(samples, dtype=np.int64)
        if values.max() > maxval:
            raise RasterFormatError("sample exceeds maxval", pos)

    values = values.astype(np.float64)
    if magic == b"P5" and values.max(initial=0) > maxval:
        raise RasterFormatError("sample exceeds maxval", end_of_maxval + 1)
    return Raster(values.reshape(height, width) / maxval)


def write_pgm(r: Raster, maxval: int = 255) -> bytes:
    """Serialize as binary P5 with a fixed ``"P5\\n{w} {h}\\n{maxval}\\n"`` header.

    Values are clamped to [0, 1] and rounded half-to-even to integer steps.
    """
    if maxval not in (255, 65535):
        raise ValueError("maxval must be 255 or 65535")
    q = np.rint(np.clip(r.pixels, 0.0, 1.0) * maxval)
    dtype = np.uint8 if maxval == 255 else np.dtype(">u2")
    header = f"P5\n{r.width} {r.height}\n{maxval}\n".encode("ascii")
    return header + q.astype(dtype).tobytes()


# ---------------------------------------------------------------------------
# RSF1: lossless float32 raster

def write_f32(r: Raster) -> bytes:
    """Serialize as RSF1: magic, u32 width, u32 height, float32 LE samples.

    Samples are stored as float32, so the round trip is exact for any
    raster whose values are float32-representable (e.g. one read back from
    an RSF1 file).
    """
    header = _RSF_HEADER.pack(RSF_MAGIC, r.width, r.height)
    return header + r.pixels.astype("<f4").tobytes()


def read_f32(stream: Union[bytes, bytearray, memoryview]) -> Raster:
    buf = bytes(stream)
    if len(buf) < _RSF_HEADER.size:
        raise RasterFormatError("truncated RSF header", len(buf))
    magic, width, height = _RSF_HEADER.unpack_from(buf, 0)
    if magic != RSF_MAGIC:
        if magic[:3] == b"RSF":
            raise RasterFormatError(f"unsupported RSF version {magic!r}", 0)
        raise RasterFormatError(f"bad magic {magic!r}", 0)
    if width < 1 or height < 1:
        raise RasterFormatError(f"bad RSF dims {width}x{height}", 4)
    count = width * height
    need = count * 4
    if need > (1 << 40):
        raise RasterFormatError(f"RSF size overflow ({width}x{height})", 4)
    if len(buf) - _RSF_HEADER.size < need:
        raise RasterFormatError(
            f"truncated payload: need {need} bytes, have {len(buf) - _RSF_HEADER.size}",
            len(buf),
        )
    values = np.frombuffer(buf, dtype="<f4", count=count, offset=_RSF_HEADER.size)
    if not np.all(np.isfinite(values)):
        raise RasterFormatError("non-finite sample in RSF payload", _RSF_HEADER.size)
    return Raster(values.astype(np.float64).reshape(height, width))


def load(path) -> Raster:
    """Read a raster, picking the format from the file extension."""
    path = str(path)
    with open(path, "rb") as fh:
        buf = fh.read()
    if path.lower().endswith((".rsf", ".rsf1", ".f32")):
        return read_f32(buf)
    return read_pgm(buf)


def save(path, r: Raster, maxval: int = 255) -> None:
    path = str(path)
    if path.lower().endswith((".rsf", ".rsf1", ".f32")):
        payload = write_f32(r)
    else:
        payload = write_pgm(r, maxval)
    with open(path, "wb") as fh:
        fh.write(payload)


# ---------------------------------------------------------------------------
# Synthetic scenes

SCENE_KINDS = ("constant", "ramp", "checkerboard", "thin-lines", "point-targets", "mixed")


@dataclass(frozen=True)
class SceneSpec:
    kind: str
    size: int
    contrast: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if self.kind not in SCENE_KINDS:
            raise ValueError(f"unknown scene kind {self.kind!r}; expected one of {SCENE_KINDS}")
        if self.size < 8:
            raise ValueError(f"scene size must be >= 8, got {self.size}")
        if not 0.0 <= self.contrast <= 1.0:
            raise ValueError(f"contrast must lie in [0, 1], got {self.contrast}")
        if self.seed < 0:
            raise ValueError("seed must be unsigned")

    @property
    def label(self) -> str:
        return f"{self.kind}:{self.size}:{self.contrast:g}:{self.seed}"


def _spaced_positions(rng: np.random.Generator, n: int, count: int, gap: int) -> list[int]:
    # positions in [2, n-3] at least `gap` apart, so features never touch
    free = list(range(2, n - 2))
    chosen = []
    while free and len(chosen) < count:
        p = int(rng.choice(free))
        chosen.append(p)
        free = [q for q in free if abs(q - p) >= gap]
    return sorted(chosen)


def _background(rng: np.random.Generator, n: int, span: float) -> np.ndarray:
    # smooth random field (Gaussian-filtered white noise, periodic) on [0, span]
    field = ndimage.gaussian_filter(rng.standard_normal((n, n)), n / 16.0, mode="wrap")
    lo, hi = field.min(), field.max()
    return span * (field - lo) / (hi - lo)


def _render(spec: SceneSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n = spec.size
    c = spec.contrast
    rng = np.random.default_rng(spec.seed)
    mask = np.zeros((n, n), dtype=bool)

    if spec.kind == "constant":
        img = np.full((n, n), c)
        return img, mask, img
    if spec.kind == "ramp":
        img = np.tile(np.arange(n, dtype=np.float64) / (n - 1), (n, 1))
        return img, mask, img
    if spec.kind == "checkerboard":
        background = np.full((n, n), (1.0 - c) / 2.0)
        cell = max(2, n // 8)
        yy, xx = np.indices((n, n))
        mask = ((yy // cell + xx // cell) % 2).astype(bool)
        return np.where(mask, background + c, background), mask, background

    background = _background(rng, n, 1.0 - c)
    if spec.kind in ("thin-lines", "mixed"):
        per_axis = max(1, n // 24)
        for r in _spaced_positions(rng, n, per_axis, 4):
            mask[r, :] = True
        for col in _spaced_positions(rng, n, per_axis, 4):
            mask[:, col] = True
    if spec.kind in ("point-targets", "mixed"):
        count = max(1, (n * n) // 64)
        taken = mask.copy()
        for _ in range(count * 4):
            if count == 0:
                break
            y, x = (int(v) for v in rng.integers(2, n - 2, size=2))
            # isolated: no other feature in the 5x5 neighborhood
            if taken[y - 2:y + 3, x - 2:x + 3].any():
                continue
            mask[y, x] = True
            taken[y, x] = True
            count -= 1
    return np.where(mask, background + c, background), mask, background


def synth_scene(spec: SceneSpec) -> Raster:
    """Deterministic synthetic ground-truth scene.

    * ``constant``: every pixel equals ``contrast``.
    * ``ramp``: pixel ``(r, c)`` is ``c / (size - 1)``.
    * ``checkerboard``: cells of ``size // 8`` pixels, light cells
      ``contrast`` above a flat ``(1 - contrast) / 2``.
    * ``thin-lines`` / ``point-targets`` / ``mixed``: one-pixel lines and/or
      isolated single pixels sitting exactly ``contrast`` above a smooth
      random background spanning ``[0, 1 - contrast]``.  Lines are at least
      4 pixels apart; point targets have no other feature within 2 pixels.
    """
    return Raster(_render(spec)[0])


def feature_mask(spec: SceneSpec) -> np.ndarray:
    """Boolean mask of the fine feature pixels placed by :func:`synth_scene`."""
    return _render(spec)[1]


def scene_background(spec: SceneSpec) -> Raster:
    """The scene with its fine features removed (the local background)."""
    return Raster(_render(spec)[2])
