"""Baseline JPEG round trip with explicit quality-scaled quantization tables.

Tables are computed here and handed to libjpeg (through Pillow), which does
the DCT and entropy coding.
"""
from __future__ import annotations

import io

import numpy as np
from PIL import Image

from ..core import ColorImage, GazeBenchError

# ITU T.81 Annex K, natural (row-major) order
LUMA_BASE = np.array(
    [
        [16, 11, 10, 16, 24, 40, 51, 61],
        [12, 12, 14, 19, 26, 58, 60, 55],
        [14, 13, 16, 24, 40, 57, 69, 56],
        [14, 17, 22, 29, 51, 87, 80, 62],
        [18, 22, 37, 56, 68, 109, 103, 77],
        [24, 35, 55, 64, 81, 104, 113, 92],
        [49, 64, 78, 87, 103, 121, 120, 101],
        [72, 92, 95, 98, 112, 100, 103, 99],
    ],
    dtype=np.int64,
)
CHROMA_BASE = np.full((8, 8), 99, dtype=np.int64)
CHROMA_BASE[:4, :4] = [[17, 18, 24, 47], [18, 21, 26, 66], [24, 26, 56, 99], [47, 66, 99, 99]]


def quality_scale(quality: int) -> int:
    """Percentage scale for a 0..100 quality; 0 is clamped to 1."""
    if not 0 <= quality <= 100:
        raise GazeBenchError(f"JPEG quality must be in [0, 100], got {quality}")
    q = max(1, int(quality))
    return 5000 // q if q < 50 else 200 - 2 * q


def quantization_tables(quality: int) -> tuple[np.ndarray, np.ndarray]:
    """(luma, chroma) 8x8 tables, clamped to the baseline range 1..255."""
    scale = quality_scale(quality)
    tabs = []
    for base in (LUMA_BASE, CHROMA_BASE):
        t = (base * scale + 50) // 100
        tabs.append(np.clip(t, 1, 255))
    return tabs[0], tabs[1]


def jpeg_round_trip(img: ColorImage, quality: int, subsampling: str = "4:2:0") -> ColorImage:
    """Encode ``img`` as baseline JPEG at ``quality`` and decode it again."""
    luma, chroma = quantization_tables(quality)
    buf = io.BytesIO()
    Image.fromarray(img.to_uint8(), mode="RGB").save(
        buf,
        format="JPEG",
        qtables=[luma.ravel().tolist(), chroma.ravel().tolist()],
        subsampling=subsampling,
        optimize=False,
        progressive=False,
    )
    buf.seek(0)
    with Image.open(buf) as im:
        return ColorImage.from_uint8(np.asarray(im.convert("RGB")))
