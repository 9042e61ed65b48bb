"""Dense 2-D map and stacked-channel tensor primitives shared by the whole pipeline.

Conventions used everywhere in this package:

* a "grid" is a float64 numpy array of shape (H, W), row-major, all finite;
* a channel tensor is (C, H, W); model inputs use the fixed channel order
  (power grid, cell density, switching activity) and model outputs are (1, H, W);
* all arithmetic is done in float64, file I/O may narrow to float32.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

__all__ = [
    "as_grid",
    "normalize_minmax",
    "gaussian_smooth",
    "stack_channels",
]


def as_grid(values, name: str = "grid") -> np.ndarray:
    """Coerce to a float64 (H, W) array, rejecting empty or non-finite input."""
    g = np.asarray(values, dtype=np.float64)
    if g.ndim != 2 or g.size == 0:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {g.shape}")
    if not np.isfinite(g).all():
        raise ValueError(f"{name} contains non-finite values")
    return g


def normalize_minmax(grid) -> np.ndarray:
    """Affinely map a grid onto [0, 1].

    A constant grid maps to all zeros: a flat map carries no spatial
    information, and this avoids a 0/0 at the degenerate point.
    """
    g = as_grid(grid)
    lo = g.min()
    hi = g.max()
    if hi == lo:
        return np.zeros_like(g)
    return (g - lo) / (hi - lo)


def _gaussian_kernel(sigma: float) -> np.ndarray:
    """1-D Gaussian taps truncated at radius ceil(3*sigma), renormalized to sum 1."""
    radius = math.ceil(3.0 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return k / k.sum()


def _smooth_axis(g: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    radius = (kernel.size - 1) // 2
    pad = [(0, 0), (0, 0)]
    pad[axis] = (radius, radius)
    padded = np.pad(g, pad, mode="reflect")
    windows = sliding_window_view(padded, kernel.size, axis=axis)
    return windows @ kernel


def gaussian_smooth(grid, sigma: float) -> np.ndarray:
    """Separable Gaussian blur with reflect padding at the borders.

    sigma = 0 returns the input unchanged. The kernel sums to exactly 1, so a
    constant grid stays constant and output extrema never exceed input extrema.
    """
    g = as_grid(grid)
    if sigma < 0:
        raise ValueError(f"sigma must be nonnegative, got {sigma}")
    if sigma == 0:
        return g.copy()
    kernel = _gaussian_kernel(float(sigma))
    out = _smooth_axis(g, kernel, axis=0)
    out = _smooth_axis(out, kernel, axis=1)
    return out


def stack_channels(power_grid, cell_density, switching) -> np.ndarray:
    """Stack the three feature maps into a (3, H, W) tensor.

    Channel order is fixed: 0 = power grid, 1 = cell density, 2 = switching.
    """
    a = as_grid(power_grid, "power_grid")
    b = as_grid(cell_density, "cell_density")
    c = as_grid(switching, "switching")
    if a.shape != b.shape or a.shape != c.shape:
        raise ValueError(
            f"channel shapes differ: {a.shape}, {b.shape}, {c.shape}"
        )
    return np.stack([a, b, c], axis=0)
