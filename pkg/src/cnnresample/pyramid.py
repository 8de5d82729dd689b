"""Gaussian / Laplacian pyramids (Burt-Adelson REDUCE and EXPAND).

The generating kernel uses parameter 0.4, i.e. taps
``(0.05, 0.25, 0.40, 0.25, 0.05)``.  Boundaries are mirrored about the edge
pixel centers and odd sizes halve with ``ceil``, so every level keeps the
exact shape needed to invert the decomposition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .raster import Raster

__all__ = [
    "GENERATING_TAPS",
    "LaplacianPyramid",
    "reduce",
    "expand",
    "build",
    "reconstruct",
    "half_shape",
    "level_shapes",
    "max_levels",
]

GENERATING_TAPS = np.array([0.05, 0.25, 0.40, 0.25, 0.05])


def half_shape(shape: tuple[int, int]) -> tuple[int, int]:
    return (-(-shape[0] // 2), -(-shape[1] // 2))


def level_shapes(shape: tuple[int, int], levels: int) -> list[tuple[int, int]]:
    """Shapes of G_0 .. G_levels under ceil-halving."""
    shapes = [tuple(shape)]
    for _ in range(levels):
        shapes.append(half_shape(shapes[-1]))
    return shapes


def max_levels(shape: tuple[int, int]) -> int:
    """Deepest K for which level K-1 is still at least 2x2."""
    k = 0
    while min(shape) >= 2:
        k += 1
        shape = half_shape(shape)
    return k


def _as_array(r) -> np.ndarray:
    return r.pixels if isinstance(r, Raster) else np.asarray(r, dtype=np.float64)


def _reduce(img: np.ndarray) -> np.ndarray:
    if img.shape[0] < 2 or img.shape[1] < 2:
        raise ValueError(f"reduce needs at least 2x2, got {img.shape[1]}x{img.shape[0]}")
    out = img
    for axis in (0, 1):
        out = ndimage.correlate1d(out, GENERATING_TAPS, axis=axis, mode="mirror")
    return out[::2, ::2]


def _expand(img: np.ndarray, target: tuple[int, int]) -> np.ndarray:
    h, w = img.shape
    th, tw = target
    for n, t in ((h, th), (w, tw)):
        if t not in (2 * n - 1, 2 * n):
            raise ValueError(
                f"expand target {tw}x{th} invalid for {w}x{h}: "
                "each axis must be 2*n-1 or 2*n"
            )
    up = np.zeros(target)
    up[::2, ::2] = img
    for axis, length in ((0, th), (1, tw)):
        if length == 1:
            continue
        up = ndimage.correlate1d(up, 2.0 * GENERATING_TAPS, axis=axis, mode="mirror")
    return up


def reduce(r: Raster) -> Raster:
    """Blur with the generating kernel, then keep every second pixel."""
    return Raster(_reduce(_as_array(r)))


def expand(r: Raster, target_w: int, target_h: int) -> Raster:
    """Zero-insert to ``target`` size and blur with the doubled kernel."""
    return Raster(_expand(_as_array(r), (target_h, target_w)))


@dataclass(frozen=True)
class LaplacianPyramid:
    """Band-pass levels ``bands[0..K-1]`` plus the low-pass ``residual``.

    Band values are signed; nothing is clamped.
    """

    bands: tuple[Raster, ...]
    residual: Raster

    def __post_init__(self):
        object.__setattr__(self, "bands", tuple(self.bands))
        if not self.bands:
            raise ValueError("pyramid needs at least one band")

    @property
    def levels(self) -> int:
        return len(self.bands)

    @property
    def shape(self) -> tuple[int, int]:
        return self.bands[0].shape

    def scaled(self, s: float) -> "LaplacianPyramid":
        return LaplacianPyramid(
            tuple(Raster(b.pixels * s) for b in self.bands),
            Raster(self.residual.pixels * s),
        )


def build(r: Raster, levels: int = 3) -> LaplacianPyramid:
    """Decompose ``r`` into ``levels`` band-pass images and a residual."""
    if levels < 1:
        raise ValueError(f"levels must be >= 1, got {levels}")
    limit = max_levels(r.shape)
    if levels > limit:
        raise ValueError(
            f"{levels} levels too many for a {r.width}x{r.height} image (max {limit})"
        )
    bands = []
    g = r.pixels
    for _ in range(levels):
        nxt = _reduce(g)
        bands.append(Raster(g - _expand(nxt, g.shape)))
        g = nxt
    return LaplacianPyramid(tuple(bands), Raster(g))


def reconstruct(p: LaplacianPyramid) -> Raster:
    """Invert :func:`build`: ``G_k = L_k + expand(G_{k+1})`` from the top down."""
    for k in range(p.levels):
        below = p.bands[k + 1].shape if k + 1 < p.levels else p.residual.shape
        if half_shape(p.bands[k].shape) != below:
            raise ValueError(
                f"inconsistent pyramid dims at level {k}: "
                f"{p.bands[k].shape} cannot sit above {below}"
            )
    g = p.residual.pixels
    for band in reversed(p.bands):
        g = band.pixels + _expand(g, band.shape)
    return Raster(g)
