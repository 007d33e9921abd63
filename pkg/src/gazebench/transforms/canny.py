"""Canny boundary maps (line drawings) of color stimuli."""
from __future__ import annotations

import math

import numpy as np
from scipy import ndimage

from .. import _kernels
from ..core import ColorImage, to_grayscale

LOW_RATIO = 0.4


def canny_edges(gray: np.ndarray, high_threshold: float = 0.3, sigma: float = math.sqrt(2.0)) -> np.ndarray:
    """Boolean edge mask of a 2-D luminance array.

    Gradients are derivative-of-Gaussian responses; magnitudes are scaled so
    the maximum is 1 before hysteresis with ``low = 0.4 * high``.
    """
    g = np.asarray(gray, dtype=np.float64)
    gx = ndimage.gaussian_filter(g, sigma, order=(0, 1), mode="nearest", truncate=4.0)
    gy = ndimage.gaussian_filter(g, sigma, order=(1, 0), mode="nearest", truncate=4.0)
    mag = np.hypot(gx, gy)
    peak = mag.max()
    # flat regions leave ~1e-17 residue in the filtered derivative
    if peak <= 1e-12:
        return np.zeros(g.shape, dtype=bool)
    mag = mag / peak
    thin = _kernels.non_max_suppression(np.ascontiguousarray(mag), gx, gy)
    return np.asarray(_kernels.hysteresis(thin, LOW_RATIO * high_threshold, high_threshold), dtype=bool)


def boundary_map(img: ColorImage, high_threshold: float = 0.3, sigma: float = math.sqrt(2.0)) -> ColorImage:
    """White-on-black edge drawing replicated to three channels."""
    edges = canny_edges(to_grayscale(img).data, high_threshold, sigma)
    return ColorImage(np.repeat(edges.astype(np.float64)[:, :, None], 3, axis=2))
