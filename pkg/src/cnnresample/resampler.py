"""Pyramid-hybrid and context-adaptive resampling, plus a common front door.

Hybrid resampling decomposes the source into a Laplacian pyramid and moves
each level onto the matching level of the output grid: the finest band with
nearest neighbor, so sub-pixel detail keeps its full local contrast, and
the coarser bands and the residual with interpolating cubic splines, so
large smooth structures stay smooth.  The output pyramid is then collapsed.

Adaptive resampling blends nearest neighbor and cubic convolution per
output pixel with weights from :func:`cnnresample.context.selection_map`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from . import context, kernels, pyramid
from .context import CnnTemplate, SelectionMap
from .kernels import Boundary, KernelSpec
from .raster import GridTransform, Raster

__all__ = [
    "Classic",
    "HybridPyramid",
    "Adaptive",
    "MethodSpec",
    "run",
    "hybrid_resample",
    "adaptive_resample",
    "level_transform",
]


@dataclass(frozen=True)
class Classic:
    kernel: KernelSpec

    @property
    def name(self) -> str:
        return self.kernel.name


@dataclass(frozen=True)
class Adaptive:
    template: CnnTemplate = field(default_factory=CnnTemplate.selection)
    window: int = 3
    threshold: float | None = context.DEFAULT_THRESHOLD

    @property
    def name(self) -> str:
        return "adaptive"


@dataclass(frozen=True)
class HybridPyramid:
    """Pyramid hybrid with ``levels`` band-pass levels.

    With ``adaptive`` set, the finest band is resampled by the adaptive
    NN/CC blend instead of plain nearest neighbor.
    """

    levels: int = 3
    adaptive: Adaptive | None = None

    def __post_init__(self):
        if self.levels < 1:
            raise ValueError(f"hybrid needs levels >= 1, got {self.levels}")

    @property
    def name(self) -> str:
        return "hybrid-adaptive" if self.adaptive is not None else "hybrid"


MethodSpec = Union[Classic, HybridPyramid, Adaptive]


def level_transform(t: GridTransform, k: int) -> GridTransform:
    """``t_k(i, j) = t(2^k i, 2^k j) / 2^k``: the transform between level-k grids."""
    s = float(2 ** k)
    return GridTransform(t.a, t.b, t.c / s, t.d, t.e, t.f / s)


def _move_level(img: np.ndarray, t: GridTransform, shape, spec: KernelSpec,
                bp: Boundary, prefilter: bool) -> np.ndarray:
    h, w = shape
    xs, ys = kernels.output_coords(t, w, h)
    if prefilter and spec.tag is kernels.Kernel.CUBIC_BSPLINE:
        img = kernels.bspline_prefilter(img)
    return kernels.sample_points(img, xs, ys, spec, bp)


def hybrid_resample(r: Raster, t: GridTransform, out_w: int, out_h: int,
                    levels: int = 3, bp: Boundary = Boundary.MIRROR,
                    level_kernels: Sequence[KernelSpec] | None = None,
                    prefilter: bool = True,
                    finest: SelectionMap | None = None) -> Raster:
    """Resample level by level through a Laplacian pyramid.

    ``level_kernels`` overrides the per-level kernels (``levels + 1``
    entries, the last one for the residual).  The default is nearest
    neighbor for band 0 and cubic B-spline for everything coarser.
    ``prefilter`` turns the B-spline into an interpolating spline.  When
    ``finest`` is given, band 0 uses the adaptive blend with that map.
    """
    t.check_invertible()
    src = pyramid.build(r, levels)
    if level_kernels is None:
        level_kernels = [kernels.NN] + [kernels.BSPLINE] * levels
    if len(level_kernels) != levels + 1:
        raise ValueError(f"need {levels + 1} level kernels, got {len(level_kernels)}")
    shapes = pyramid.level_shapes((out_h, out_w), levels)

    bands = []
    for k, band in enumerate(src.bands):
        tk = level_transform(t, k)
        if k == 0 and finest is not None:
            moved = adaptive_resample(band, tk, shapes[0][1], shapes[0][0], finest, bp).pixels
        else:
            moved = _move_level(band.pixels, tk, shapes[k], level_kernels[k], bp, prefilter)
        bands.append(Raster(moved))
    residual = _move_level(src.residual.pixels, level_transform(t, levels),
                           shapes[levels], level_kernels[levels], bp, prefilter)
    return pyramid.reconstruct(pyramid.LaplacianPyramid(tuple(bands), Raster(residual)))


def adaptive_resample(r: Raster, t: GridTransform, out_w: int, out_h: int,
                      sel: SelectionMap, bp: Boundary = Boundary.MIRROR,
                      smooth: KernelSpec = kernels.CUBIC) -> Raster:
    """Per-pixel convex blend ``w * NN + (1 - w) * CC``.

    ``w`` is the selection map sampled bilinearly at each output pixel's
    source position.
    """
    t.check_invertible()
    if sel.shape != r.shape:
        raise ValueError(f"selection map {sel.shape} does not match raster {r.shape}")
    xs, ys = kernels.output_coords(t, out_w, out_h)
    sharp = kernels.sample_points(r, xs, ys, kernels.NN, bp)
    soft = kernels.sample_points(r, xs, ys, smooth, bp)
    wmap = sel.weights.pixels
    if wmap.min() == wmap.max():
        w = np.full(xs.shape, wmap.flat[0])
    else:
        w = np.clip(kernels.sample_points(wmap, xs, ys, kernels.BILINEAR, bp), 0.0, 1.0)
    return Raster(w * sharp + (1.0 - w) * soft)


def run(r: Raster, t: GridTransform, out_w: int, out_h: int, m: MethodSpec,
        bp: Boundary = Boundary.MIRROR) -> Raster:
    """Resample ``r`` onto an ``out_w x out_h`` grid with method ``m``."""
    if isinstance(m, Classic):
        return kernels.resample(r, t, out_w, out_h, m.kernel, bp)
    if isinstance(m, HybridPyramid):
        finest = None
        if m.adaptive is not None:
            a = m.adaptive
            finest = context.selection_map(r, a.template, a.window, a.threshold)
        return hybrid_resample(r, t, out_w, out_h, m.levels, bp, finest=finest)
    if isinstance(m, Adaptive):
        sel = context.selection_map(r, m.template, m.window, m.threshold)
        return adaptive_resample(r, t, out_w, out_h, sel, bp)
    raise TypeError(f"unknown method spec {m!r}")
