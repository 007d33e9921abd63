"""Rotation, shear, flips, band cropping and downscaling."""
from __future__ import annotations

import numpy as np

from ..core import (
    DEFAULT_FILL,
    AffineMap,
    ColorImage,
    GazeBenchError,
    apply_affine,
    place,
    scaled_placement,
)

CROP_MODES = ("remove", "keep")


def rotate(img: ColorImage, degrees: float, fill: float = DEFAULT_FILL) -> ColorImage:
    """Counter-clockwise rotation with a loose bounding box.

    Multiples of 90 degrees are exact pixel permutations.
    """
    if float(degrees) % 90.0 == 0.0:
        k = int(round(degrees / 90.0)) % 4
        return ColorImage(np.rot90(img.data, k=k, axes=(0, 1)))
    return apply_affine(img, AffineMap.rotation(degrees), fill, "loose")


def shear(img: ColorImage, matrix, fill: float = DEFAULT_FILL) -> ColorImage:
    """Warp by a 3x3 row-vector affine matrix with a loose bounding box."""
    amap = matrix if isinstance(matrix, AffineMap) else AffineMap(np.asarray(matrix, dtype=np.float64))
    if abs(amap.det) < 1e-12:
        raise GazeBenchError("shear matrix is singular")
    return apply_affine(img, amap, fill, "loose")


def mirror(img: ColorImage) -> ColorImage:
    """Horizontal flip."""
    return ColorImage(img.data[:, ::-1])


def flip_vertical(img: ColorImage) -> ColorImage:
    return ColorImage(img.data[::-1])


def invert(img: ColorImage) -> ColorImage:
    """Upside-down version (180 degree rotation)."""
    return ColorImage(img.data[::-1, ::-1])


def crop_region(side: str, band, width: int, height: int) -> tuple[int, int, int, int]:
    """Removed rectangle ``(x0, y0, x1, y1)`` (half-open) for a band on ``side``.

    ``band`` is ``(band_height, band_width)``; a band shorter than the side it
    hugs is centered along it.
    """
    bh, bw = (int(v) for v in band)
    if bh < 0 or bw < 0 or bh > height or bw > width:
        raise GazeBenchError(f"band {bh}x{bw} does not fit a {height}x{width} image")
    if side == "left":
        y0 = (height - bh) // 2
        return 0, y0, bw, y0 + bh
    if side == "top":
        x0 = (width - bw) // 2
        return x0, 0, x0 + bw, bh
    raise GazeBenchError(f"unknown crop side {side!r}")


def crop_band(img: ColorImage, side: str, band, mode: str = "remove", fill: float = DEFAULT_FILL) -> ColorImage:
    """Delete a band from one side of the image.

    ``remove`` paints the band with ``fill`` and leaves every other pixel in
    place on the original canvas.  ``keep`` returns the remaining content
    alone at its smaller size (the band must span the whole side).
    """
    if mode not in CROP_MODES:
        raise GazeBenchError(f"unknown crop mode {mode!r}")
    x0, y0, x1, y1 = crop_region(side, band, img.width, img.height)
    if x1 == x0 or y1 == y0:
        return img
    if mode == "keep":
        if side == "left" and (y0, y1) == (0, img.height):
            return ColorImage(img.data[:, x1:])
        if side == "top" and (x0, x1) == (0, img.width):
            return ColorImage(img.data[y1:])
        raise GazeBenchError("keep mode needs a band spanning the full side")
    out = np.array(img.data)
    out[y0:y1, x0:x1] = fill
    return ColorImage(out)


def downscale(img: ColorImage, factor: float, fill: float = DEFAULT_FILL) -> ColorImage:
    """Bilinear shrink by ``factor``, centered on the original canvas."""
    if not 0.0 < factor <= 1.0:
        raise GazeBenchError(f"downscale factor must be in (0, 1], got {factor}")
    pl = scaled_placement(img.width, img.height, factor)
    return ColorImage(np.clip(place(img.data, pl, fill), 0.0, 1.0))
