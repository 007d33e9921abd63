"""On-disk eye-tracking dataset layout.

::

    root/
      <GroupId>/              one directory per transformation group
        <stimulus_id>.png     the stimulus as shown
        fixations.csv         stimulus_id,observer_id,x,y on that image's pixel grid
        density/<sid>.png     optional precomputed 16-bit gaze maps

Group directory names are exactly the catalog ids (``Reference``,
``Noise1``, ...), so a downloaded dataset maps onto the layout by renaming
directories only.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from PIL import Image, UnidentifiedImageError

from ..core import (
    ColorImage,
    DensityMap,
    FixationSet,
    ValidationError,
    VisualAngleCalibration,
    load_density_png,
    read_fixations_csv,
)
from ..metrics import smooth_fixations
from ..transforms import GROUP_IDS

FIXATIONS_FILE = "fixations.csv"
DENSITY_DIR = "density"


@dataclass(frozen=True)
class GroupEntry:
    """Files of one group; ``sizes`` holds each image's ``(width, height)``."""

    name: str
    directory: Path
    images: Mapping[str, Path]
    sizes: Mapping[str, tuple[int, int]]
    fixations: Path | None = None
    densities: Mapping[str, Path] = field(default_factory=dict)

    @property
    def stimuli(self) -> list[str]:
        return sorted(self.images)


@dataclass(frozen=True)
class DatasetLayout:
    root: Path
    groups: Mapping[str, GroupEntry]

    @property
    def n_images(self) -> int:
        return sum(len(g.images) for g in self.groups.values())

    def group(self, name: str) -> GroupEntry:
        if name not in self.groups:
            raise ValidationError(f"{self.root}: no group {name!r} (have {', '.join(self.groups) or 'none'})")
        return self.groups[name]

    def image(self, group: str, sid: str) -> ColorImage:
        return ColorImage.load(self.group(group).images[sid])

    def fixations(self, group: str) -> dict[str, FixationSet]:
        """Fixation sets keyed by stimulus id, each on its image's pixel grid."""
        g = self.group(group)
        if g.fixations is None:
            raise ValidationError(f"group {group} has no {FIXATIONS_FILE}")
        return read_fixations_csv(g.fixations, dict(g.sizes))

    def density(self, group: str, sid: str, cal: VisualAngleCalibration = VisualAngleCalibration(),
                fixations: Mapping[str, FixationSet] | None = None) -> DensityMap:
        """Precomputed gaze map when present, else smoothed fixations; sum-to-one."""
        g = self.group(group)
        if sid in g.densities:
            return load_density_png(g.densities[sid], frame=group)
        fixs = fixations if fixations is not None else self.fixations(group)
        if sid not in fixs or len(fixs[sid]) == 0:
            raise ValidationError(f"group {group} stimulus {sid}: no density map and no fixations")
        dm = smooth_fixations(fixs[sid], cal)
        return DensityMap(dm.values, dm.normalization, group)


def _png_size(path: Path, problems: list[str]) -> tuple[int, int] | None:
    try:
        with Image.open(path) as im:
            return im.size
    except (OSError, UnidentifiedImageError) as exc:
        problems.append(f"unreadable image {path}: {exc}")
        return None


def _fixation_ids(path: Path, problems: list[str]) -> set[str]:
    try:
        with open(path, newline="") as fh:
            return {row.get("stimulus_id") or "" for row in csv.DictReader(fh)}
    except OSError as exc:
        problems.append(f"unreadable fixation file {path}: {exc}")
        return set()


def scan_group(d: Path, problems: list[str], known: bool) -> GroupEntry:
    images, sizes, densities = {}, {}, {}
    fix = d / FIXATIONS_FILE
    for p in sorted(d.iterdir()):
        if p.is_file() and p.suffix.lower() == ".png":
            size = _png_size(p, problems)
            if size is not None:
                images[p.stem], sizes[p.stem] = p, size
        elif p.is_dir() and p.name == DENSITY_DIR:
            for q in sorted(p.iterdir()):
                if q.suffix.lower() == ".png":
                    densities[q.stem] = q
                else:
                    problems.append(f"unexpected file {q}")
        elif p != fix:
            problems.append(f"unexpected entry {p}")
    if not known:
        problems.append(f"directory {d.name!r} is not a group id (expected one of {', '.join(GROUP_IDS)})")
    if not images:
        problems.append(f"group {d.name} has no PNG images")
    for sid in sorted(set(densities) - set(images)):
        problems.append(f"orphaned density map {densities[sid]} (no image {sid}.png)")
    fixations = None
    if fix.is_file():
        fixations = fix
        for sid in sorted(_fixation_ids(fix, problems) - set(images)):
            problems.append(f"{fix}: fixation rows reference missing stimulus {sid!r}")
    return GroupEntry(d.name, d, images, sizes, fixations, densities)


def ingest(root, require_fixations: bool = False) -> DatasetLayout:
    """Scan and validate a dataset tree.

    Every problem found is collected and reported together in one
    :class:`ValidationError`.
    """
    root = Path(root)
    if not root.is_dir():
        raise ValidationError(f"dataset root {root} is not a directory")
    problems: list[str] = []
    groups = {}
    for d in sorted(p for p in root.iterdir() if p.is_dir()):
        entry = scan_group(d, problems, d.name in GROUP_IDS)
        if require_fixations and entry.fixations is None:
            problems.append(f"group {d.name} is missing {FIXATIONS_FILE}")
        groups[d.name] = entry
    if not groups:
        problems.insert(0, f"{root}: found 0 groups")
    if problems:
        raise ValidationError("invalid dataset layout:\n  " + "\n  ".join(problems))
    return DatasetLayout(root, groups)
