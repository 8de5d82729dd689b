"""Raster resampling with a hybrid Laplacian-pyramid resampler and
cellular-neural-network context adaptation, plus classical kernels and
quality metrics for benchmarking them."""

from .raster import GridTransform, Raster, SceneSpec, synth_scene
from .kernels import Boundary, Kernel, KernelSpec
from .resampler import Adaptive, Classic, HybridPyramid, run

__version__ = "0.1.0"

__all__ = [
    "GridTransform",
    "Raster",
    "SceneSpec",
    "synth_scene",
    "Boundary",
    "Kernel",
    "KernelSpec",
    "Adaptive",
    "Classic",
    "HybridPyramid",
    "run",
]
