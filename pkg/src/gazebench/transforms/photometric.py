"""Pixel-value transformations: motion blur, additive noise, contrast."""
from __future__ import annotations

import math

import numpy as np
from scipy import ndimage

from ..core import ColorImage, GazeBenchError


def motion_kernel(length: int, angle: float) -> np.ndarray:
    """Normalized anti-aliased line kernel.

    Each tap's weight is ``max(0, 1 - d)`` where ``d`` is its distance to a
    centered segment of ``length - 1`` pixels at ``angle`` degrees
    (counter-clockwise, y axis pointing down).  Axis-aligned kernels reduce
    to ``length`` equal taps.
    """
    if length < 1:
        raise GazeBenchError(f"motion blur length must be >= 1, got {length}")
    half = (length - 1) / 2.0
    t = math.radians(angle)
    ux, uy = math.cos(t), -math.sin(t)
    r = int(math.ceil(half)) + 1
    dy, dx = np.mgrid[-r : r + 1, -r : r + 1].astype(np.float64)
    proj = np.clip(dx * ux + dy * uy, -half, half)
    dist = np.hypot(dx - proj * ux, dy - proj * uy)
    k = np.clip(1.0 - dist, 0.0, None)
    # snap float dust so axis-aligned kernels are exactly uniform
    k[k < 1e-12] = 0.0
    k[np.abs(k - 1.0) < 1e-12] = 1.0
    rows = np.flatnonzero(k.any(axis=1))
    cols = np.flatnonzero(k.any(axis=0))
    k = k[rows[0] : rows[-1] + 1, cols[0] : cols[-1] + 1]
    return k / k.sum()


def motion_blur(img: ColorImage, length: int, angle: float) -> ColorImage:
    """Convolve every channel with :func:`motion_kernel`, replicate borders."""
    k = motion_kernel(length, angle)
    if k.shape == (1, 1):
        return img
    out = np.empty_like(img.data)
    for c in range(3):
        out[:, :, c] = ndimage.convolve(img.data[:, :, c], k, mode="nearest")
    return ColorImage(np.clip(out, 0.0, 1.0))


def noise_field(shape, variance: float, seed: int, mean: float = 0.0) -> np.ndarray:
    """The Gaussian draws :func:`gaussian_noise` adds, before clamping."""
    if variance < 0:
        raise GazeBenchError(f"noise variance must be >= 0, got {variance}")
    rng = np.random.default_rng(seed)
    return rng.normal(mean, math.sqrt(variance), size=shape)


def gaussian_noise(img: ColorImage, variance: float, seed: int, mean: float = 0.0) -> ColorImage:
    """Add i.i.d. Gaussian noise on the [0, 1] scale, then clamp."""
    if variance == 0 and mean == 0:
        return img
    noise = noise_field(img.data.shape, variance, seed, mean)
    return ColorImage(np.clip(img.data + noise, 0.0, 1.0))


def contrast_adjust(img: ColorImage, out_low: float, out_high: float) -> ColorImage:
    """Linearly remap [0, 1] onto [out_low, out_high] per channel."""
    if not 0.0 <= out_low < out_high <= 1.0:
        raise GazeBenchError(f"need 0 <= out_low < out_high <= 1, got ({out_low}, {out_high})")
    return ColorImage(out_low + (out_high - out_low) * img.data)
