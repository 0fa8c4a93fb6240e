"""Separable Gaussian blur with border renormalization (no invented padding)."""

import numpy as np
from scipy.ndimage import gaussian_filter1d


def separable_blur(grid, sigma, radius):
    """Zero-padded separable Gaussian filter over the first two axes."""
    out = gaussian_filter1d(grid, sigma, axis=0, mode="constant", cval=0.0, radius=radius)
    return gaussian_filter1d(out, sigma, axis=1, mode="constant", cval=0.0, radius=radius)


def border_weight(shape, sigma, radius):
    """Per-cell sum of in-bounds kernel weights (the renormalization divisor)."""
    return separable_blur(np.ones(shape[:2]), sigma, radius)


def renormalized_blur(grid, sigma, radius):
    """Gaussian blur whose kernel is renormalized where it hangs over the border.

    Preserves constant grids exactly. ``grid`` may be (H, W) or (H, W, C).
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if radius < 1:
        raise ValueError("radius must be >= 1")
    den = border_weight(grid.shape, sigma, radius)
    if grid.ndim == 3:
        den = den[..., None]
    return separable_blur(grid, sigma, radius) / den.astype(grid.dtype, copy=False)
