"""Stimulus transformations and the inverse alignment of gaze maps."""
from .canny import boundary_map, canny_edges
from .catalog import (
    ALIGNABLE,
    GROUP_IDS,
    DownscaleControl,
    TransformRecord,
    align_to_reference,
    apply_transform,
    forward_density,
    get_record,
    output_frame,
    transform_catalog,
    warp_density,
)
from .geometric import crop_band, crop_region, downscale, flip_vertical, invert, mirror, rotate, shear
from .jpeg import jpeg_round_trip, quantization_tables, quality_scale
from .photometric import contrast_adjust, gaussian_noise, motion_blur, motion_kernel, noise_field

__all__ = [
    "ALIGNABLE",
    "GROUP_IDS",
    "DownscaleControl",
    "TransformRecord",
    "align_to_reference",
    "apply_transform",
    "boundary_map",
    "canny_edges",
    "contrast_adjust",
    "crop_band",
    "crop_region",
    "downscale",
    "flip_vertical",
    "forward_density",
    "gaussian_noise",
    "get_record",
    "invert",
    "jpeg_round_trip",
    "mirror",
    "motion_blur",
    "motion_kernel",
    "noise_field",
    "output_frame",
    "quality_scale",
    "quantization_tables",
    "rotate",
    "shear",
    "transform_catalog",
    "warp_density",
]
