"""The stimulus groups, their parameters, and inverse alignment of gaze maps."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np

from ..core import (
    DEFAULT_FILL,
    AffineMap,
    ColorImage,
    DensityMap,
    GazeBenchError,
    fit_placement,
    loose_frame,
    normalize,
    scaled_placement,
    warp,
)
from .canny import boundary_map
from .geometric import crop_band, downscale, invert, mirror, rotate, shear
from .jpeg import jpeg_round_trip
from .photometric import contrast_adjust, gaussian_noise, motion_blur

GROUP_IDS = (
    "Reference",
    "MotionBlur1", "MotionBlur2",
    "Noise1", "Noise2",
    "JPEG1", "JPEG2",
    "Contrast1", "Contrast2",
    "Rotation1", "Rotation2",
    "Shearing1", "Shearing2", "Shearing3",
    "Inversion", "Mirroring", "Boundary",
    "Cropping1", "Cropping2",
    "DownScaling1", "DownScaling2",
)  # fmt: skip

ALIGNABLE = frozenset(
    {"Rotation1", "Rotation2", "Shearing1", "Shearing2", "Shearing3", "Inversion", "Mirroring",
     "DownScaling1", "DownScaling2"}
)  # fmt: skip


@dataclass(frozen=True)
class DownscaleControl:
    lambda1: float = 0.548
    lambda2: float = 0.726

    def __post_init__(self):
        for v in (self.lambda1, self.lambda2):
            if not 0.0 < v < 1.0:
                raise GazeBenchError(f"downscale factor {v} outside (0, 1)")


@dataclass(frozen=True, eq=False)
class TransformRecord:
    """One stimulus group.

    ``geometry`` is the linear part of the group's spatial action (source
    pixel -> output pixel, about the origin) and ``alignment`` its exact
    inverse; both are ``None`` for groups compared in place.
    """

    id: str
    kind: str
    params: Mapping = field(default_factory=dict)
    geometry: AffineMap | None = None

    def __post_init__(self):
        object.__setattr__(self, "params", MappingProxyType(dict(self.params)))

    @property
    def invertible_for_alignment(self) -> bool:
        return self.id in ALIGNABLE

    @property
    def alignment(self) -> AffineMap | None:
        if not self.invertible_for_alignment:
            return None
        return self.geometry.inverse()


def _shear_matrix(rows) -> AffineMap:
    return AffineMap(np.array(rows, dtype=np.float64))


def transform_catalog(controls: DownscaleControl = DownscaleControl()) -> list[TransformRecord]:
    """Reference, the 18 transformed groups, and the two downscale controls."""
    shear1 = [[1, 0, 0], [0.5, 1, 0], [0, 0, 1]]
    shear2 = [[1, 0.5, 0], [0, 1, 0], [0, 0, 1]]
    shear3 = [[1, 0.5, 0], [0.5, 1, 0], [0, 0, 1]]
    return [
        TransformRecord("Reference", "identity"),
        TransformRecord("MotionBlur1", "motion_blur", {"length": 15, "angle": 0}),
        TransformRecord("MotionBlur2", "motion_blur", {"length": 35, "angle": 90}),
        TransformRecord("Noise1", "gaussian_noise", {"mean": 0.0, "variance": 0.1}),
        TransformRecord("Noise2", "gaussian_noise", {"mean": 0.0, "variance": 0.2}),
        TransformRecord("JPEG1", "jpeg", {"quality": 5}),
        TransformRecord("JPEG2", "jpeg", {"quality": 0}),
        TransformRecord("Contrast1", "contrast", {"out_low": 0.3, "out_high": 0.7}),
        TransformRecord("Contrast2", "contrast", {"out_low": 0.4, "out_high": 0.6}),
        TransformRecord("Rotation1", "rotate", {"degrees": -45}, AffineMap.rotation(-45)),
        TransformRecord("Rotation2", "rotate", {"degrees": -135}, AffineMap.rotation(-135)),
        TransformRecord("Shearing1", "shear", {"matrix": shear1}, _shear_matrix(shear1)),
        TransformRecord("Shearing2", "shear", {"matrix": shear2}, _shear_matrix(shear2)),
        TransformRecord("Shearing3", "shear", {"matrix": shear3}, _shear_matrix(shear3)),
        TransformRecord("Inversion", "invert", {"degrees": -180}, AffineMap.scaling(-1.0, -1.0)),
        TransformRecord("Mirroring", "mirror", {}, AffineMap.scaling(-1.0, 1.0)),
        TransformRecord("Boundary", "canny", {"high_threshold": 0.3, "sigma": math.sqrt(2.0)}),
        TransformRecord("Cropping1", "crop", {"side": "left", "band": (1080, 200)}),
        TransformRecord("Cropping2", "crop", {"side": "top", "band": (200, 1920)}),
        TransformRecord("DownScaling1", "downscale", {"lambda": controls.lambda1},
                        AffineMap.scaling(controls.lambda1)),
        TransformRecord("DownScaling2", "downscale", {"lambda": controls.lambda2},
                        AffineMap.scaling(controls.lambda2)),
    ]  # fmt: skip


def get_record(group_id: str) -> TransformRecord:
    for rec in transform_catalog():
        if rec.id == group_id:
            return rec
    raise GazeBenchError(f"unknown transformation group {group_id!r}")


def scaled_band(band, width: int, height: int, reference=(1080, 1920)) -> tuple[int, int]:
    """Rescale a band given for a 1080x1920 stimulus to another image size."""
    bh, bw = band
    return int(round(bh * height / reference[0])), int(round(bw * width / reference[1]))


def apply_transform(record: TransformRecord, img: ColorImage, seed: int = 0, crop_mode: str = "remove",
                    fill: float = DEFAULT_FILL, scale_bands: bool = True) -> ColorImage:
    """Run ``record`` on ``img``.

    Crop bands are defined for 1080x1920 stimuli; with ``scale_bands`` they are
    rescaled proportionally for other sizes.
    """
    p = record.params
    kind = record.kind
    if kind == "identity":
        return img
    if kind == "motion_blur":
        return motion_blur(img, p["length"], p["angle"])
    if kind == "gaussian_noise":
        return gaussian_noise(img, p["variance"], seed, p["mean"])
    if kind == "jpeg":
        return jpeg_round_trip(img, p["quality"])
    if kind == "contrast":
        return contrast_adjust(img, p["out_low"], p["out_high"])
    if kind == "rotate":
        return rotate(img, p["degrees"], fill)
    if kind == "shear":
        return shear(img, p["matrix"], fill)
    if kind == "invert":
        return invert(img)
    if kind == "mirror":
        return mirror(img)
    if kind == "canny":
        return boundary_map(img, p["high_threshold"], p["sigma"])
    if kind == "crop":
        band = p["band"]
        if scale_bands and (img.height, img.width) != (1080, 1920):
            band = scaled_band(band, img.width, img.height)
        return crop_band(img, p["side"], band, crop_mode, fill)
    if kind == "downscale":
        return downscale(img, p["lambda"], fill)
    raise GazeBenchError(f"unhandled transformation kind {kind!r}")


def output_frame(record: TransformRecord, width: int, height: int) -> tuple[AffineMap, int, int]:
    """Full source->output pixel map of a geometric group, and the output size."""
    if record.geometry is None:
        raise GazeBenchError(f"{record.id} has no spatial action")
    if record.kind == "downscale":
        return scaled_placement(width, height, record.params["lambda"]).affine(), width, height
    return loose_frame(record.geometry, width, height)


def warp_density(values: np.ndarray, full_map: AffineMap, out_w: int, out_h: int) -> np.ndarray:
    """Push a density through ``full_map`` keeping mass per unit area consistent."""
    out = warp(values, full_map, out_w, out_h, 0.0)
    return np.clip(out, 0.0, None) / abs(full_map.det)


def _alignment_map(record: TransformRecord, shape, reference_size) -> AffineMap:
    h, w = shape
    rw, rh = reference_size if reference_size is not None else (w, h)
    full, ow, oh = output_frame(record, rw, rh)
    if (oh, ow) == (h, w):
        return full.inverse()
    if (h, w) == (rh, rw):
        # output was shown fitted onto a reference-sized display canvas
        display = full.then(fit_placement(ow, oh, rw, rh).affine())
        return display.inverse()
    raise GazeBenchError(
        f"{record.id}: a {w}x{h} map matches neither the {ow}x{oh} output nor the {rw}x{rh} reference canvas"
    )


def align_to_reference(dm: DensityMap, record: TransformRecord, reference_size=None) -> DensityMap:
    """Warp a gaze map recorded on a transformed stimulus back onto the Reference canvas.

    ``reference_size`` is the Reference ``(width, height)``; it defaults to the
    map's own size, which is right for flips, downscaling and maps recorded on
    a reference-sized display canvas.
    """
    if record.id == "Reference":
        return DensityMap(dm.values, dm.normalization, "Reference")
    if not record.invertible_for_alignment:
        raise GazeBenchError(f"{record.id} is compared in place and has no inverse alignment")
    if record.kind == "mirror" and reference_size in (None, (dm.shape[1], dm.shape[0])):
        return DensityMap(dm.values[:, ::-1], dm.normalization, "Reference")
    if record.kind == "invert" and reference_size in (None, (dm.shape[1], dm.shape[0])):
        return DensityMap(dm.values[::-1, ::-1], dm.normalization, "Reference")
    inv = _alignment_map(record, dm.shape, reference_size)
    rw, rh = reference_size if reference_size is not None else (dm.shape[1], dm.shape[0])
    raw = warp_density(dm.values, inv, rw, rh)
    return DensityMap(normalize(raw, dm.normalization), dm.normalization, "Reference")


def forward_density(dm: DensityMap, record: TransformRecord) -> DensityMap:
    """Warp a Reference-frame gaze map into the transformed stimulus frame.

    This is the label transform used for geometric augmentation.
    """
    if record.kind == "identity" or record.geometry is None:
        return dm
    if record.kind == "mirror":
        return DensityMap(dm.values[:, ::-1], dm.normalization, record.id)
    if record.kind == "invert":
        return DensityMap(dm.values[::-1, ::-1], dm.normalization, record.id)
    h, w = dm.shape
    full, ow, oh = output_frame(record, w, h)
    raw = warp_density(dm.values, full, ow, oh)
    return DensityMap(normalize(raw, dm.normalization), dm.normalization, record.id)
