"""Resampling quality metrics: difference error, entropy deviation, correlation.

All reductions go through NumPy's pairwise summation, so results do not
depend on how work is split across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .raster import Raster

__all__ = [
    "UndefinedMetricError",
    "MetricsReport",
    "diff_map",
    "avg_diff_error",
    "entropy",
    "entropy_deviation",
    "correlation",
    "report",
    "DEFAULT_BINS",
]

DEFAULT_BINS = 256


class UndefinedMetricError(ValueError):
    """The metric has no value for these inputs (e.g. zero variance)."""


def _check_dims(a: Raster, b: Raster) -> None:
    if a.shape != b.shape:
        raise ValueError(f"raster dims differ: {a.width}x{a.height} vs {b.width}x{b.height}")


def diff_map(interp: Raster, truth: Raster) -> Raster:
    """Signed per-pixel error ``interp - truth``."""
    _check_dims(interp, truth)
    return Raster(interp.pixels - truth.pixels)


def avg_diff_error(interp: Raster, truth: Raster) -> float:
    """Mean absolute per-pixel difference."""
    return float(np.mean(np.abs(diff_map(interp, truth).pixels)))


def entropy(r: Raster, bins: int = DEFAULT_BINS) -> float:
    """Shannon entropy in bits of a ``bins``-bin histogram over [0, 1].

    Values outside [0, 1] (cubic overshoot) are counted in the edge bins.
    """
    if bins < 2:
        raise ValueError(f"bins must be >= 2, got {bins}")
    v = np.clip(r.pixels.ravel(), 0.0, 1.0)
    idx = np.minimum((v * bins).astype(np.int64), bins - 1)
    counts = np.bincount(idx, minlength=bins)
    p = counts[counts > 0] / v.size
    return float(-np.sum(p * np.log2(p))) + 0.0


def entropy_deviation(a: Raster, b: Raster, bins: int = DEFAULT_BINS) -> float:
    return abs(entropy(a, bins) - entropy(b, bins))


def correlation(a: Raster, b: Raster) -> float:
    """Pearson correlation coefficient.

    Raises :class:`UndefinedMetricError` when either raster is constant.
    """
    _check_dims(a, b)
    x, y = a.pixels.ravel(), b.pixels.ravel()
    if np.ptp(x) == 0.0 or np.ptp(y) == 0.0:
        raise UndefinedMetricError("correlation undefined: zero variance")
    xc = x - x.mean()
    yc = y - y.mean()
    r = np.sum(xc * yc) / np.sqrt(np.sum(xc * xc) * np.sum(yc * yc))
    return float(np.clip(r, -1.0, 1.0))


@dataclass(frozen=True)
class MetricsReport:
    """One row of the comparison table for a (method, image) pair.

    ``correlation`` is ``None`` only when it was undefined and the caller
    asked for a lenient report.
    """

    method_id: str
    correlation: float | None
    entropy_src: float
    entropy_out: float
    entropy_deviation: float
    avg_diff_error: float
    max_diff: float
    signed_mean: float

    COLUMNS = ("method", "correlation", "entropy_deviation", "avg_diff_error")

    def row(self) -> tuple:
        """Values in table order: method, correlation, entropy deviation, avg diff."""
        return (self.method_id, self.correlation, self.entropy_deviation, self.avg_diff_error)


def report(interp: Raster, truth: Raster, method_id: str, bins: int = DEFAULT_BINS,
           lenient: bool = False) -> MetricsReport:
    """Compute every metric for ``interp`` against ``truth``.

    With ``lenient=True`` an undefined correlation is stored as ``None``
    instead of raising.
    """
    d = diff_map(interp, truth).pixels
    try:
        r = correlation(interp, truth)
    except UndefinedMetricError:
        if not lenient:
            raise
        r = None
    e_src = entropy(truth, bins)
    e_out = entropy(interp, bins)
    return MetricsReport(
        method_id=method_id,
        correlation=r,
        entropy_src=e_src,
        entropy_out=e_out,
        entropy_deviation=abs(e_src - e_out),
        avg_diff_error=float(np.mean(np.abs(d))),
        max_diff=float(np.max(np.abs(d))),
        signed_mean=float(np.mean(d)),
    )
