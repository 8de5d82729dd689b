"""Contextual analysis that decides, per pixel, how sharp the resampler should be.

The pipeline is: local contrast map -> fixed affine rescale to [-1, 1] ->
Chua-Yang cellular neural network (input and initial state both set to the
rescaled contrast) -> output ``y`` mapped to a blend weight ``(y + 1) / 2``
-> optional hard threshold.  A weight of 1 means "sharp" (nearest
neighbor), 0 means "smooth" (cubic convolution).

HSIC (Hilbert-Schmidt independence criterion) with Gaussian kernels is used
to pick a small, maximally informative training subset from a larger pool
of per-pixel descriptors.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage

from .kernels import boundary_index
from .raster import Raster

__all__ = [
    "CnnTemplate",
    "CnnResult",
    "SelectionMap",
    "SampleSet",
    "contrast_map",
    "rescale_contrast",
    "cnn_run",
    "hsic",
    "median_bandwidth",
    "select_samples",
    "subset_hsic",
    "selection_map",
    "selection_from_contrast",
    "pixel_samples",
    "DEFAULT_THRESHOLD",
]

DEFAULT_THRESHOLD = 0.5


def _template(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if arr.shape != (3, 3):
        raise ValueError(f"template must be 3x3, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("template entries must be finite")
    arr.flags.writeable = False
    return arr


def _center(value: float) -> np.ndarray:
    arr = np.zeros((3, 3))
    arr[1, 1] = value
    return arr


@dataclass(frozen=True, eq=False)
class CnnTemplate:
    """Cloning template of a 3x3 Chua-Yang cellular network.

    ``A`` weights neighbor outputs (feedback), ``B`` neighbor inputs
    (control), ``z`` is the cell bias.  ``h`` is the forward-Euler step,
    iteration stops once the largest state change drops below ``tol`` or
    after ``max_iters`` steps.
    """

    A: np.ndarray = field(default_factory=lambda: _center(2.0))
    B: np.ndarray = field(default_factory=lambda: _center(1.0))
    z: float = 0.0
    h: float = 0.1
    max_iters: int = 500
    tol: float = 1e-5

    def __post_init__(self):
        object.__setattr__(self, "A", _template(self.A))
        object.__setattr__(self, "B", _template(self.B))
        if not self.h > 0:
            raise ValueError(f"step h must be > 0, got {self.h}")
        if not self.tol > 0:
            raise ValueError(f"tol must be > 0, got {self.tol}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")

    @classmethod
    def selection(cls) -> "CnnTemplate":
        """Default template for kernel selection.

        Bistable self-feedback with no coupling between outputs, so each cell
        settles to +1 or -1 depending on its own rescaled contrast, nudged by
        the contrast of its eight neighbors through ``B``.
        """
        b = np.full((3, 3), 0.125)
        b[1, 1] = 1.0
        return cls(A=_center(2.0), B=b, z=0.0)

    @classmethod
    def edge(cls) -> "CnnTemplate":
        """Classic binary edge-extraction template."""
        b = np.full((3, 3), -1.0)
        b[1, 1] = 8.0
        return cls(A=_center(2.0), B=b, z=-1.0)

    def replace(self, **changes) -> "CnnTemplate":
        params = dict(A=self.A, B=self.B, z=self.z, h=self.h,
                      max_iters=self.max_iters, tol=self.tol)
        params.update(changes)
        return CnnTemplate(**params)

    @property
    def diffusion_free(self) -> bool:
        off = self.A.copy()
        off[1, 1] = 0.0
        return not off.any()

    def __eq__(self, other):
        if not isinstance(other, CnnTemplate):
            return NotImplemented
        return (np.array_equal(self.A, other.A) and np.array_equal(self.B, other.B)
                and (self.z, self.h, self.max_iters, self.tol)
                == (other.z, other.h, other.max_iters, other.tol))


class CnnResult(NamedTuple):
    state: Raster
    outputs: Raster
    iters: int


@dataclass(frozen=True)
class SelectionMap:
    """Per-pixel blend weight in [0, 1]; 1 selects the sharp kernel."""

    weights: Raster

    def __post_init__(self):
        w = self.weights.pixels
        if w.min() < 0.0 or w.max() > 1.0:
            raise ValueError("selection weights must lie in [0, 1]")

    @classmethod
    def constant(cls, width: int, height: int, value: float) -> "SelectionMap":
        return cls(Raster.full(width, height, value))

    @property
    def shape(self) -> tuple[int, int]:
        return self.weights.shape


@dataclass(frozen=True, eq=False)
class SampleSet:
    """``n`` samples of ``d`` descriptors with their response labels."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.float64)
        if f.ndim == 1:
            f = f[:, None]
        if y.ndim == 1:
            y = y[:, None]
        if f.ndim != 2 or y.ndim != 2 or f.shape[0] != y.shape[0]:
            raise ValueError(f"features {f.shape} and labels {y.shape} disagree")
        if f.shape[0] < 2:
            raise ValueError("a sample set needs n >= 2")
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(y))):
            raise ValueError("sample set contains non-finite values")
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "labels", y)

    def __len__(self):
        return self.features.shape[0]


# ---------------------------------------------------------------------------
# Local contrast


def contrast_map(r: Raster, window: int = 3) -> Raster:
    """Windowed standard deviation divided by the global intensity range.

    Mirror boundaries.  A flat image gives an all-zero map; the result does
    not change when the image is scaled or offset.
    """
    if window < 3 or window % 2 == 0:
        raise ValueError(f"window must be odd and >= 3, got {window}")
    img = r.pixels
    lo, hi = img.min(), img.max()
    if hi == lo:
        return Raster(np.zeros_like(img))
    norm = (img - lo) / (hi - lo)
    half = window // 2
    h, w = img.shape
    rows = boundary_index(np.arange(-half, h + half), h)
    cols = boundary_index(np.arange(-half, w + half), w)
    padded = norm[np.ix_(rows, cols)]
    patches = sliding_window_view(padded, (window, window))
    return Raster(patches.std(axis=(-2, -1)))


def rescale_contrast(c: np.ndarray) -> np.ndarray:
    """Map contrast from [0, 0.5] onto [-1, 1].

    Range-normalized contrast never exceeds 0.5 (the largest possible
    standard deviation of values spread over a unit interval).
    """
    return np.clip(4.0 * np.asarray(c) - 1.0, -1.0, 1.0)


# ---------------------------------------------------------------------------
# Cellular neural network


def _saturate(x: np.ndarray) -> np.ndarray:
    # identical to 0.5 * (|x + 1| - |x - 1|) but exact at the rails
    return np.clip(x, -1.0, 1.0)


def cnn_run(t: CnnTemplate, input: Raster, state0: Raster) -> CnnResult:
    """Integrate ``dx/dt = -x + A*y + B*u + z`` with synchronous Euler steps.

    ``y = 0.5 * (|x + 1| - |x - 1|)``.  The 3x3 neighborhoods use mirror
    boundaries.  Returns the final state, the saturated outputs and the
    number of steps taken.
    """
    if input.shape != state0.shape:
        raise ValueError(f"input {input.shape} and state {state0.shape} dims differ")
    u = input.pixels
    drive = ndimage.correlate(u, t.B, mode="mirror") + t.z
    feedback = t.A.any()
    x = state0.pixels.copy()
    iters = 0
    while iters < t.max_iters:
        y = _saturate(x)
        dx = -x + drive
        if feedback:
            dx += ndimage.correlate(y, t.A, mode="mirror")
        step = t.h * dx
        x = x + step
        iters += 1
        if np.max(np.abs(step)) < t.tol:
            break
    return CnnResult(Raster(x), Raster(_saturate(x)), iters)


# ---------------------------------------------------------------------------
# HSIC


def _columns(x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"expected a vector or n x d matrix, got shape {arr.shape}")
    return arr


def _sq_dists(x: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - x[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def median_bandwidth(x) -> float:
    """Median of the nonzero pairwise distances, or 1.0 if there are none."""
    d = np.sqrt(_sq_dists(_columns(x)))
    nz = d[np.triu_indices_from(d, k=1)]
    nz = nz[nz > 0]
    return float(np.median(nz)) if nz.size else 1.0


def _gram(x: np.ndarray, sigma: float) -> np.ndarray:
    return np.exp(-_sq_dists(x) / (2.0 * sigma * sigma))


def _centered(k: np.ndarray) -> np.ndarray:
    return k - k.mean(axis=0, keepdims=True) - k.mean(axis=1, keepdims=True) + k.mean()


def _hsic_from_grams(k: np.ndarray, l: np.ndarray) -> float:
    n = k.shape[0]
    # trace(K H L H) == <HKH, HLH>_F, a sum of elementwise products
    return float(np.sum(_centered(k) * _centered(l))) / (n - 1) ** 2


def hsic(x, y, sigma_x: float | None = None, sigma_y: float | None = None) -> float:
    """Empirical HSIC ``trace(K H L H) / (n - 1)^2`` with Gaussian Gram matrices.

    ``x`` and ``y`` are vectors or ``n x d`` matrices.  Bandwidths default to
    the median pairwise distance of each argument.
    """
    x = _columns(x)
    y = _columns(y)
    n = x.shape[0]
    if y.shape[0] != n:
        raise ValueError(f"sample counts differ: {n} vs {y.shape[0]}")
    if n < 2:
        raise ValueError("hsic needs n >= 2")
    sigma_x = median_bandwidth(x) if sigma_x is None else sigma_x
    sigma_y = median_bandwidth(y) if sigma_y is None else sigma_y
    if not (sigma_x > 0 and sigma_y > 0):
        raise ValueError("bandwidths must be > 0")
    return _hsic_from_grams(_gram(x, sigma_x), _gram(y, sigma_y))


def subset_hsic(s: SampleSet, indices, sigma: float | None = None,
                sigma_y: float | None = None) -> float:
    """HSIC between features and labels restricted to ``indices``.

    Bandwidths are fixed from the full set so subsets are comparable.
    """
    sx, sy = _bandwidths(s, sigma, sigma_y)
    idx = np.asarray(indices)
    return _hsic_from_grams(_gram(s.features, sx)[np.ix_(idx, idx)],
                            _gram(s.labels, sy)[np.ix_(idx, idx)])


def _bandwidths(s, sigma, sigma_y):
    sx = median_bandwidth(s.features) if sigma is None else sigma
    if sigma_y is None:
        sy = sx if sigma is not None else median_bandwidth(s.labels)
    else:
        sy = sigma_y
    if not (sx > 0 and sy > 0):
        raise ValueError("bandwidths must be > 0")
    return sx, sy


def _beats(value: float, best: float) -> bool:
    # values within a relative 1e-12 count as ties; ties keep the earlier index
    if not np.isfinite(best):
        return value > best
    return value > best + 1e-12 * max(1.0, abs(best))


def select_samples(s: SampleSet, k: int, sigma: float | None = None,
                   sigma_y: float | None = None) -> list[int]:
    """Greedy forward selection of ``k`` samples maximizing subset HSIC.

    Starts from the best pair, then repeatedly adds the sample that gives
    the largest HSIC between the selected features and labels.  Ties go to
    the lowest index.  Returns sorted indices.
    """
    n = len(s)
    if not 2 <= k <= n:
        raise ValueError(f"k must satisfy 2 <= k <= n={n}, got {k}")
    if k == n:
        return list(range(n))
    sx, sy = _bandwidths(s, sigma, sigma_y)
    K = _gram(s.features, sx)
    L = _gram(s.labels, sy)

    def objective(idx):
        ix = np.ix_(idx, idx)
        return _hsic_from_grams(K[ix], L[ix])

    best, chosen = -np.inf, None
    for pair in itertools.combinations(range(n), 2):
        val = objective(list(pair))
        if _beats(val, best):
            best, chosen = val, list(pair)
    while len(chosen) < k:
        best, pick = -np.inf, None
        for j in range(n):
            if j in chosen:
                continue
            val = objective(chosen + [j])
            if _beats(val, best):
                best, pick = val, j
        chosen.append(pick)
    return sorted(chosen)


def pixel_samples(r: Raster, labels: Raster, window: int = 3) -> SampleSet:
    """Per-pixel descriptors: local contrast and the finest band energy.

    ``labels`` holds the per-pixel response (e.g. which kernel did better).
    """
    from . import pyramid

    c = contrast_map(r, window).pixels.ravel()
    if min(r.shape) >= 2:
        band = pyramid.build(r, 1).bands[0].pixels.ravel()
    else:
        band = np.zeros_like(c)
    return SampleSet(np.column_stack([c, np.abs(band)]), labels.pixels.ravel())


# ---------------------------------------------------------------------------
# Selection map


def selection_from_contrast(contrast: Raster, t: CnnTemplate | None = None,
                            threshold: float | None = DEFAULT_THRESHOLD) -> SelectionMap:
    """Run the network on a precomputed contrast map.

    ``threshold=None`` keeps the soft weights ``(y + 1) / 2``.  Otherwise a
    pixel is sharp (1) where its soft weight exceeds ``threshold`` and smooth
    (0) elsewhere; ``threshold <= 0`` makes every pixel sharp and
    ``threshold >= 1`` every pixel smooth.
    """
    t = CnnTemplate.selection() if t is None else t
    u = Raster(rescale_contrast(contrast.pixels))
    y = cnn_run(t, u, u).outputs.pixels
    w = np.clip((y + 1.0) / 2.0, 0.0, 1.0)
    if threshold is not None:
        if threshold <= 0.0:
            w = np.ones_like(w)
        else:
            w = (w > threshold).astype(np.float64)
    return SelectionMap(Raster(w))


def selection_map(r: Raster, t: CnnTemplate | None = None, window: int = 3,
                  threshold: float | None = DEFAULT_THRESHOLD) -> SelectionMap:
    """Per-pixel sharp/smooth weights for ``r`` (see :func:`selection_from_contrast`)."""
    return selection_from_contrast(contrast_map(r, window), t, threshold)
