"""Gaze invariance matrices, KL discrepancy heatmaps and augmentation sets."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import ColorImage, DensityMap, GazeBenchError, LuminanceGrid, ValidationError
from .metrics import EPS, cc, kl_div, kl_terms, sim
from .transforms import ALIGNABLE, apply_transform, forward_density, get_record

_METRIC_FUNCS = {"CC": cc, "SIM": sim, "KL": lambda ref, test: kl_div(ref, test)}


@dataclass(frozen=True)
class InvarianceMatrix:
    """Per (group, stimulus) comparison of transformed gaze with Reference gaze.

    ``groups`` is ranked best-first: descending mean for CC/SIM, ascending
    for KL.
    """

    metric: str
    groups: tuple[str, ...]
    stimuli: tuple[str, ...]
    values: Mapping[str, Mapping[str, float]]
    group_means: Mapping[str, float]

    def row(self, group: str) -> list[float]:
        return [self.values[group][s] for s in self.stimuli]


def invariance_matrix(dataset: Mapping[str, Mapping[str, DensityMap]], metric: str) -> InvarianceMatrix:
    """Compare each group's gaze maps with the Reference maps of the same stimuli.

    ``dataset`` maps group id -> stimulus id -> density.  Maps of geometric
    groups must already be aligned (``frame == "Reference"``).  KL is taken as
    KL(Reference || transformed).
    """
    m = metric.upper()
    if m not in _METRIC_FUNCS:
        raise GazeBenchError(f"invariance matrices support CC, SIM and KL, not {metric!r}")
    if "Reference" not in dataset:
        raise ValidationError("dataset has no Reference group")
    ref = dataset["Reference"]
    stimuli = tuple(sorted(ref))
    func = _METRIC_FUNCS[m]
    values: dict[str, dict[str, float]] = {}
    for group, maps in dataset.items():
        missing = sorted(set(stimuli) - set(maps))
        extra = sorted(set(maps) - set(stimuli))
        if missing or extra:
            raise ValidationError(f"group {group}: unpaired stimuli (missing {missing}, no reference for {extra})")
        row = {}
        for sid in stimuli:
            test = maps[sid]
            if group in ALIGNABLE and test.frame != "Reference":
                raise ValidationError(f"group {group} stimulus {sid}: geometric gaze map is not aligned to Reference")
            if test.shape != ref[sid].shape:
                raise ValidationError(f"group {group} stimulus {sid}: shape {test.shape} != {ref[sid].shape}")
            row[sid] = func(ref[sid].values, test.values)
        values[group] = row
    means = {g: float(np.mean(list(r.values()))) for g, r in values.items()}
    sign = 1.0 if m == "KL" else -1.0
    order = tuple(sorted(means, key=lambda g: (sign * means[g], g)))
    return InvarianceMatrix(m, order, stimuli, values, means)


def kl_heatmap(ref: DensityMap, test: DensityMap, normalize: bool = True) -> LuminanceGrid:
    """Per-pixel KL contributions, max-normalized for display by default."""
    terms = kl_terms(ref.values, test.values, EPS)
    if not normalize:
        return LuminanceGrid(terms)
    peak = np.abs(terms).max()
    return LuminanceGrid(terms / peak if peak > 0 else terms)


@dataclass(frozen=True)
class AugmentationPartition:
    valid: frozenset[str]
    invalid: frozenset[str]

    def __post_init__(self):
        if self.valid & self.invalid:
            raise ValidationError("valid and invalid sets overlap")


VALID_SET = ("Reference", "Mirroring", "Inversion", "Contrast1", "Shearing1", "JPEG1", "Noise1")
INVALID_SET = ("Rotation1", "Rotation2", "Shearing2", "Shearing3", "Cropping1", "Cropping2", "MotionBlur2")


def partition() -> AugmentationPartition:
    """Label-preserving (valid) versus gaze-altering (invalid) transformations."""
    return AugmentationPartition(frozenset(VALID_SET), frozenset(INVALID_SET))


def augment_dataset(images: Sequence[ColorImage], gazes: Sequence[DensityMap], which: str = "valid",
                    seed: int = 0) -> list[tuple[ColorImage, DensityMap]]:
    """Expand paired (image, gaze) data with every non-Reference member of a set.

    Geometric members warp the gaze label with the image; photometric members
    keep the label unchanged.  Output order is pair-major, member order as in
    the partition listing.
    """
    if len(images) != len(gazes):
        raise ValidationError(f"{len(images)} images but {len(gazes)} gaze maps")
    members = {"valid": VALID_SET, "invalid": INVALID_SET}.get(which)
    if members is None:
        raise GazeBenchError(f"augmentation set must be 'valid' or 'invalid', not {which!r}")
    records = [get_record(g) for g in members if g != "Reference"]
    seeds = np.random.SeedSequence(seed).generate_state(max(len(images), 1), dtype=np.uint32)
    out = []
    for img, gaze, s in zip(images, gazes, seeds):
        if gaze.shape != (img.height, img.width):
            raise ValidationError(f"gaze map {gaze.shape} does not match image {img.height}x{img.width}")
        for rec in records:
            timg = apply_transform(rec, img, seed=int(s))
            label = forward_density(gaze, rec) if rec.geometry is not None else gaze
            out.append((timg, label))
    return out
