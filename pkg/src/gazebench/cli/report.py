"""Deterministic CSV, JSON and PNG reports.

Floats are written with ``repr`` so they round-trip exactly; heatmaps are
colormapped arrays saved through Pillow, which keeps the bytes independent
of plotting backends and fonts.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from matplotlib import colormaps
from PIL import Image

from ..analysis import InvarianceMatrix
from ..core import GazeBenchError, ValidationError

LONG_COLUMNS = ("stimulus_id", "group", "metric", "value")
HEATMAP_CMAP = "inferno"
MATRIX_CMAP = "viridis"


def _num(v: float) -> str:
    return repr(float(v))


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def write_table_csv(header: Sequence[str], rows: Iterable[Sequence], path) -> Path:
    """Plain table in the given row order; floats written with ``repr``."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([_num(v) if isinstance(v, float) else v for v in r])
    return path


def write_long_csv(rows: Iterable[Sequence], path) -> Path:
    """One ``stimulus_id,group,metric,value`` row per score, sorted."""
    rows = sorted((str(s), str(g), str(m), float(v)) for s, g, m, v in rows)
    if not rows:
        raise ValidationError("no results to report")
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(LONG_COLUMNS)
        for s, g, m, v in rows:
            w.writerow([s, g, m, _num(v)])
    return path


def read_long_csv(path) -> list[tuple[str, str, str, float]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != LONG_COLUMNS:
            raise ValidationError(f"{path}: expected header {','.join(LONG_COLUMNS)}")
        return [(r["stimulus_id"], r["group"], r["metric"], float(r["value"])) for r in reader]


def write_matrix_csv(matrix: InvarianceMatrix, path) -> Path:
    """Rows are groups in ranked order; columns are the stimuli then the group mean."""
    if not matrix.groups:
        raise ValidationError("no results to report")
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["group", *matrix.stimuli, "mean"])
        for g in matrix.groups:
            w.writerow([g, *(_num(v) for v in matrix.row(g)), _num(matrix.group_means[g])])
    return path


def read_matrix_csv(path, metric: str) -> InvarianceMatrix:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:1] != ["group"] or rows[0][-1:] != ["mean"]:
        raise ValidationError(f"{path}: not an invariance matrix CSV")
    stimuli = tuple(rows[0][1:-1])
    values, means = {}, {}
    for r in rows[1:]:
        if len(r) != len(stimuli) + 2:
            raise ValidationError(f"{path}: row for {r[:1]} has {len(r)} fields")
        values[r[0]] = {s: float(v) for s, v in zip(stimuli, r[1:-1])}
        means[r[0]] = float(r[-1])
    return InvarianceMatrix(metric.upper(), tuple(values), stimuli, values, means)


def matrix_to_dict(matrix: InvarianceMatrix) -> dict:
    return {
        "metric": matrix.metric,
        "groups": list(matrix.groups),
        "stimuli": list(matrix.stimuli),
        "values": {g: matrix.row(g) for g in matrix.groups},
        "group_means": {g: matrix.group_means[g] for g in matrix.groups},
    }


def write_json(obj, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


def colorize(a: np.ndarray, cmap: str = HEATMAP_CMAP, vmin: float | None = None,
             vmax: float | None = None) -> np.ndarray:
    """Map a 2-D array through a named colormap to uint8 RGB."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or not np.all(np.isfinite(a)):
        raise GazeBenchError("heatmaps need a finite 2-D array")
    lo = a.min() if vmin is None else vmin
    hi = a.max() if vmax is None else vmax
    t = np.zeros_like(a) if hi <= lo else np.clip((a - lo) / (hi - lo), 0.0, 1.0)
    rgba = colormaps[cmap](t, bytes=True)
    return np.ascontiguousarray(rgba[:, :, :3])


def save_heatmap_png(a: np.ndarray, path, cmap: str = HEATMAP_CMAP, vmin=None, vmax=None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(colorize(a, cmap, vmin, vmax), mode="RGB").save(path, format="PNG")
    return path


def save_matrix_png(matrix: InvarianceMatrix, path, cell: int = 16) -> Path:
    """Group-by-stimulus grid in ranked row order, one ``cell``-pixel square per entry."""
    grid = np.array([matrix.row(g) for g in matrix.groups])
    big = np.kron(grid, np.ones((cell, cell)))
    return save_heatmap_png(big, path, MATRIX_CMAP)
