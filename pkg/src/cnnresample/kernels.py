"""Interpolation kernels and the separable affine-grid resampling engine.

Every kernel is evaluated as an even weight function ``w(t)`` of the signed
distance ``t`` (in source pixels) between a sample position and a pixel
center.  For a fractional phase the engine gathers ``2 * support`` taps
(one for nearest neighbor), renormalizes them to sum to one, and applies
them first along x and then along y.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .raster import GridTransform, Raster

__all__ = [
    "Kernel",
    "KernelSpec",
    "Boundary",
    "weight",
    "weights_1d",
    "boundary_index",
    "sample",
    "sample_points",
    "resample",
    "bspline_prefilter",
    "NN",
    "BILINEAR",
    "CUBIC",
    "KD16",
    "BSPLINE",
]


class Kernel(enum.Enum):
    NEAREST = "nn"
    BILINEAR = "bl"
    CUBIC_CONVOLUTION = "cc"
    KAISER_SINC16 = "kd16"
    CUBIC_BSPLINE = "bspline"


class Boundary(enum.Enum):
    MIRROR = "mirror"
    CLAMP = "clamp"


_SUPPORT = {
    Kernel.NEAREST: 0.5,
    Kernel.BILINEAR: 1,
    Kernel.CUBIC_CONVOLUTION: 2,
    Kernel.CUBIC_BSPLINE: 2,
    Kernel.KAISER_SINC16: 8,
}

_INTERPOLATING = {
    Kernel.NEAREST,
    Kernel.BILINEAR,
    Kernel.CUBIC_CONVOLUTION,
    Kernel.KAISER_SINC16,
}


@dataclass(frozen=True)
class KernelSpec:
    """Kernel tag plus its shape parameter.

    ``a`` shapes the cubic-convolution kernel (default -0.5) and ``beta``
    the Kaiser window of the 16-tap windowed sinc (default 4.0).  Both are
    ignored by the other kernels.
    """

    tag: Kernel
    a: float = -0.5
    beta: float = 4.0

    def __post_init__(self):
        if not isinstance(self.tag, Kernel):
            object.__setattr__(self, "tag", Kernel(self.tag))
        if self.tag is Kernel.CUBIC_CONVOLUTION and not -1.0 <= self.a < 0.0:
            raise ValueError(f"cubic convolution needs a in [-1, 0), got {self.a}")
        if self.tag is Kernel.KAISER_SINC16 and not self.beta > 0.0:
            raise ValueError(f"Kaiser beta must be > 0, got {self.beta}")

    @property
    def support(self) -> float:
        return _SUPPORT[self.tag]

    @property
    def taps(self) -> int:
        return 1 if self.tag is Kernel.NEAREST else int(2 * self.support)

    @property
    def interpolating(self) -> bool:
        return self.tag in _INTERPOLATING

    @property
    def name(self) -> str:
        return self.tag.value


NN = KernelSpec(Kernel.NEAREST)
BILINEAR = KernelSpec(Kernel.BILINEAR)
CUBIC = KernelSpec(Kernel.CUBIC_CONVOLUTION)
KD16 = KernelSpec(Kernel.KAISER_SINC16)
BSPLINE = KernelSpec(Kernel.CUBIC_BSPLINE)


def _keys(at: np.ndarray, a: float) -> np.ndarray:
    near = ((a + 2.0) * at - (a + 3.0)) * at * at + 1.0
    far = ((a * at - 5.0 * a) * at + 8.0 * a) * at - 4.0 * a
    return np.where(at <= 1.0, near, np.where(at < 2.0, far, 0.0))


def _bspline(at: np.ndarray) -> np.ndarray:
    near = 2.0 / 3.0 - at * at + 0.5 * at * at * at
    far = (2.0 - at) ** 3 / 6.0
    return np.where(at < 1.0, near, np.where(at < 2.0, far, 0.0))


def _kaiser_sinc(at: np.ndarray, support: float, beta: float) -> np.ndarray:
    u = np.minimum(at / support, 1.0)
    window = np.i0(beta * np.sqrt(1.0 - u * u)) / np.i0(beta)
    return np.sinc(at) * window


def weight(spec: KernelSpec, t) -> np.ndarray | float:
    """Kernel weight at signed offset ``t`` (scalar or array).

    Zero for ``|t| >= support``.  Interpolating kernels return exactly 1 at
    ``t = 0`` and exactly 0 at every other integer offset.
    """
    scalar = np.ndim(t) == 0
    t = np.asarray(t, dtype=np.float64)
    at = np.abs(t)
    tag = spec.tag
    if tag is Kernel.NEAREST:
        w = (at < 0.5).astype(np.float64)
    elif tag is Kernel.BILINEAR:
        w = np.maximum(1.0 - at, 0.0)
    elif tag is Kernel.CUBIC_CONVOLUTION:
        w = _keys(at, spec.a)
    elif tag is Kernel.CUBIC_BSPLINE:
        w = _bspline(at)
    else:
        w = _kaiser_sinc(at, spec.support, spec.beta)
    w = np.where(at >= spec.support, 0.0, w)
    if spec.interpolating and tag is not Kernel.NEAREST:
        integral = at == np.round(at)
        w = np.where(integral, (at == 0.0).astype(np.float64), w)
    return float(w) if scalar else w


def weights_1d(spec: KernelSpec, phase):
    """Normalized taps for a sample at fractional ``phase`` past a pixel.

    Returns ``(start, taps)``: tap ``j`` multiplies the pixel at offset
    ``start + j`` from ``floor(x)``.  ``phase`` may be a scalar (``taps``
    is 1D) or an array (``taps`` gains a trailing axis).

    Nearest neighbor picks the lower pixel when ``phase == 0.5`` exactly.
    """
    phase = np.asarray(phase, dtype=np.float64)
    if spec.tag is Kernel.NEAREST:
        start = nearest_offset(phase)
        return (int(start) if start.ndim == 0 else start), np.ones(phase.shape + (1,))
    support = int(spec.support)
    offsets = np.arange(-support + 1, support + 1, dtype=np.float64)
    raw = weight(spec, phase[..., None] - offsets)
    taps = raw / raw.sum(axis=-1, keepdims=True)
    return -support + 1, taps


def nearest_offset(phase) -> np.ndarray:
    """0 or 1: which neighbor nearest neighbor picks (ties go low)."""
    return (np.asarray(phase) > 0.5).astype(np.int64)


def boundary_index(idx: np.ndarray, n: int, bp: Boundary = Boundary.MIRROR) -> np.ndarray:
    """Map arbitrary integer indices into ``[0, n)``.

    Mirror reflects about the edge pixel centers (-1 -> 1); clamp repeats
    the edge pixel.
    """
    idx = np.asarray(idx, dtype=np.int64)
    if bp is Boundary.CLAMP or n == 1:
        return np.clip(idx, 0, n - 1)
    period = 2 * (n - 1)
    m = np.mod(idx, period)
    return np.where(m >= n, period - m, m)


def _axis_taps(spec: KernelSpec, coord: np.ndarray, n: int, bp: Boundary):
    base = np.floor(coord)
    phase = coord - base
    base = base.astype(np.int64)
    if spec.tag is Kernel.NEAREST:
        idx = boundary_index(base + nearest_offset(phase), n, bp)
        return idx[..., None], np.ones(coord.shape + (1,))
    start, taps = weights_1d(spec, phase)
    offsets = np.arange(taps.shape[-1]) + start
    idx = boundary_index(base[..., None] + offsets, n, bp)
    return idx, taps


def sample_points(r: Raster | np.ndarray, xs, ys, spec: KernelSpec,
                  bp: Boundary = Boundary.MIRROR) -> np.ndarray:
    """Evaluate the separable interpolant at arrays of source coordinates."""
    img = r.pixels if isinstance(r, Raster) else np.asarray(r, dtype=np.float64)
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
        raise ValueError("sample coordinates must be finite")
    xs, ys = np.broadcast_arrays(xs, ys)
    h, w = img.shape
    xi, xw = _axis_taps(spec, xs, w, bp)
    yi, yw = _axis_taps(spec, ys, h, bp)
    out = np.zeros(xs.shape)
    for jy in range(yw.shape[-1]):
        rows = yi[..., jy]
        line = np.zeros(xs.shape)
        for jx in range(xw.shape[-1]):
            line += xw[..., jx] * img[rows, xi[..., jx]]
        out += yw[..., jy] * line
    return out


def sample(r: Raster, x: float, y: float, spec: KernelSpec,
           bp: Boundary = Boundary.MIRROR) -> float:
    """Interpolated intensity at source position ``(x, y)``."""
    return float(sample_points(r, x, y, spec, bp))


def output_coords(t: GridTransform, out_w: int, out_h: int):
    yy, xx = np.mgrid[0:out_h, 0:out_w].astype(np.float64)
    return t(xx, yy)


def resample(r: Raster, t: GridTransform, out_w: int, out_h: int,
             spec: KernelSpec, bp: Boundary = Boundary.MIRROR) -> Raster:
    """Backward-map every output pixel through ``t`` and interpolate."""
    t.check_invertible()
    if out_w < 1 or out_h < 1:
        raise ValueError(f"output dims must be >= 1, got {out_w}x{out_h}")
    xs, ys = output_coords(t, out_w, out_h)
    return Raster(sample_points(r, xs, ys, spec, bp))


def bspline_prefilter(r: Raster | np.ndarray) -> np.ndarray:
    """Cubic B-spline coefficients whose spline interpolates ``r``.

    Mirror boundary conditions, consistent with :class:`Boundary.MIRROR`.
    Sampling the coefficients with :data:`BSPLINE` then reproduces the
    input at integer positions.
    """
    img = r.pixels if isinstance(r, Raster) else np.asarray(r, dtype=np.float64)
    out = img.astype(np.float64)
    for axis in (0, 1):
        if out.shape[axis] > 1:
            out = ndimage.spline_filter1d(out, order=3, axis=axis, mode="mirror",
                                          output=np.float64)
    return out
