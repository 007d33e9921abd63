"""Shared raster containers, geometry primitives and file I/O.

Conventions used throughout the package:

* intensities are float64 in ``[0, 1]``; 8-bit conversion rounds half away
  from zero and happens only at file boundaries;
* pixel centers sit on integer coordinates with the origin at the top-left,
  ``x`` is the column and ``y`` the row;
* affine maps act on homogeneous row vectors ``[x y 1] @ M`` and send
  source pixels to destination pixels.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from PIL import Image
from scipy.signal import fftconvolve

from . import _kernels

LUMA_WEIGHTS = (0.299, 0.587, 0.114)
DEFAULT_CANVAS = (1920, 1080)  # (width, height)
DEFAULT_FILL = 0.5
NORMALIZATIONS = ("sum-to-one", "max-to-one", "raw")


class GazeBenchError(ValueError):
    """Base class for input and validation errors raised by this package."""


class DegenerateInputError(GazeBenchError):
    """An input is constant (zero variance) or otherwise carries no signal."""


class ValidationError(GazeBenchError):
    """A dataset, file or argument violates a documented invariant."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.flags.writeable = False
    return a


# ---------------------------------------------------------------------------
# rasters


@dataclass(frozen=True, eq=False)
class ColorImage:
    """RGB raster, ``data`` has shape (height, width, 3) with values in [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.data, dtype=np.float64)
        if a.ndim != 3 or a.shape[2] != 3 or a.shape[0] < 1 or a.shape[1] < 1:
            raise ValidationError(f"ColorImage needs shape (H, W, 3), got {a.shape}")
        if not np.all(np.isfinite(a)) or a.min() < 0.0 or a.max() > 1.0:
            raise ValidationError("ColorImage intensities must be finite and inside [0, 1]")
        object.__setattr__(self, "data", _frozen(a))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    @classmethod
    def from_uint8(cls, a) -> "ColorImage":
        a = np.asarray(a)
        if a.ndim == 2:
            a = np.repeat(a[:, :, None], 3, axis=2)
        return cls(a.astype(np.float64) / 255.0)

    def to_uint8(self) -> np.ndarray:
        return to_uint8(self.data)

    @classmethod
    def load(cls, path) -> "ColorImage":
        with Image.open(path) as im:
            return cls.from_uint8(np.asarray(im.convert("RGB")))

    def save(self, path) -> None:
        Image.fromarray(self.to_uint8(), mode="RGB").save(path, format="PNG")


@dataclass(frozen=True, eq=False)
class LuminanceGrid:
    """Single-channel raster of finite reals, shape (height, width)."""

    data: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.data, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise ValidationError(f"LuminanceGrid needs a non-empty 2-D array, got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValidationError("LuminanceGrid values must be finite")
        object.__setattr__(self, "data", _frozen(a))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)


@dataclass(frozen=True, eq=False)
class DensityMap:
    """Nonnegative gaze probability map.

    ``frame`` names the canvas the map lives on; maps warped back onto the
    Reference canvas carry ``frame="Reference"``.
    """

    values: np.ndarray
    normalization: str = "sum-to-one"
    frame: str | None = None

    def __post_init__(self):
        a = np.asarray(self.values, dtype=np.float64)
        if a.ndim != 2 or a.size == 0:
            raise ValidationError(f"DensityMap needs a non-empty 2-D array, got {a.shape}")
        if self.normalization not in NORMALIZATIONS:
            raise ValidationError(f"unknown normalization {self.normalization!r}")
        if not np.all(np.isfinite(a)) or a.min() < 0.0:
            raise ValidationError("DensityMap values must be finite and nonnegative")
        if self.normalization == "sum-to-one" and abs(a.sum() - 1.0) > 1e-9:
            raise ValidationError(f"sum-to-one DensityMap sums to {a.sum()!r}")
        if self.normalization == "max-to-one" and abs(a.max() - 1.0) > 1e-9:
            raise ValidationError(f"max-to-one DensityMap peaks at {a.max()!r}")
        object.__setattr__(self, "values", _frozen(a))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    @classmethod
    def normalized(cls, values, normalization="sum-to-one", frame=None) -> "DensityMap":
        """Build a map from raw nonnegative values, applying ``normalization``."""
        a = np.clip(np.asarray(values, dtype=np.float64), 0.0, None)
        return cls(normalize(a, normalization), normalization, frame)

    def renormalized(self, normalization: str | None = None) -> "DensityMap":
        norm = normalization or self.normalization
        return DensityMap(normalize(self.values, norm), norm, self.frame)


def normalize(a: np.ndarray, normalization: str) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if normalization == "raw":
        return a.copy()
    total = a.sum() if normalization == "sum-to-one" else a.max()
    if not total > 0:
        raise DegenerateInputError(f"cannot apply {normalization} to an all-zero map")
    out = a / total
    if normalization == "sum-to-one":
        # one correction pass pulls the sum inside 1e-15 for huge maps
        out /= out.sum()
    return out


@dataclass(frozen=True, eq=False)
class FixationSet:
    """Discrete gaze points for one stimulus.

    ``xs``/``ys`` are pixel coordinates, ``observers`` the integer observer id
    of each point; ``canvas`` is ``(width, height)``.
    """

    stimulus_id: str
    xs: np.ndarray
    ys: np.ndarray
    observers: np.ndarray
    canvas: tuple[int, int]

    def __post_init__(self):
        xs = _frozen(np.atleast_1d(self.xs))
        ys = _frozen(np.atleast_1d(self.ys))
        obs = np.array(np.atleast_1d(self.observers), dtype=np.int64)
        obs.flags.writeable = False
        if not (xs.shape == ys.shape == obs.shape) or xs.ndim != 1:
            raise ValidationError("xs, ys and observers must be equal-length 1-D sequences")
        w, h = (int(v) for v in self.canvas)
        if w < 1 or h < 1:
            raise ValidationError(f"invalid canvas {self.canvas}")
        if xs.size and (xs.min() < 0 or ys.min() < 0 or xs.max() >= w or ys.max() >= h):
            raise ValidationError(f"fixation outside the {w}x{h} canvas for stimulus {self.stimulus_id!r}")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)
        object.__setattr__(self, "observers", obs)
        object.__setattr__(self, "canvas", (w, h))

    @classmethod
    def from_points(cls, stimulus_id, points: Iterable[Sequence], canvas) -> "FixationSet":
        """``points`` holds ``(x, y)`` or ``(x, y, observer_id)`` tuples."""
        pts = [tuple(p) for p in points]
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        obs = [p[2] if len(p) > 2 else 0 for p in pts]
        return cls(str(stimulus_id), np.asarray(xs, float), np.asarray(ys, float), np.asarray(obs, int), tuple(canvas))

    def __len__(self) -> int:
        return self.xs.size

    @property
    def observer_ids(self) -> list[int]:
        return sorted(set(self.observers.tolist()))

    def pixels(self) -> tuple[np.ndarray, np.ndarray]:
        """Integer (row, col) of every point, nearest pixel center."""
        w, h = self.canvas
        cols = np.clip(np.floor(self.xs + 0.5), 0, w - 1).astype(np.intp)
        rows = np.clip(np.floor(self.ys + 0.5), 0, h - 1).astype(np.intp)
        return rows, cols

    def raster(self) -> np.ndarray:
        """Binary fixation map of shape (height, width)."""
        w, h = self.canvas
        out = np.zeros((h, w), dtype=np.float64)
        rows, cols = self.pixels()
        out[rows, cols] = 1.0
        return out

    def select(self, mask) -> "FixationSet":
        mask = np.asarray(mask, dtype=bool)
        return FixationSet(self.stimulus_id, self.xs[mask], self.ys[mask], self.observers[mask], self.canvas)

    def for_observers(self, ids: Iterable[int]) -> "FixationSet":
        return self.select(np.isin(self.observers, list(ids)))

    def split_by_observer(self) -> list["FixationSet"]:
        return [self.for_observers([o]) for o in self.observer_ids]

    def rescaled(self, canvas) -> "FixationSet":
        """Map points onto another canvas size by scaling pixel extents."""
        w0, h0 = self.canvas
        w1, h1 = (int(v) for v in canvas)
        xs = np.clip((self.xs + 0.5) * (w1 / w0) - 0.5, 0, w1 - 1)
        ys = np.clip((self.ys + 0.5) * (h1 / h0) - 0.5, 0, h1 - 1)
        return FixationSet(self.stimulus_id, xs, ys, self.observers, (w1, h1))


def merge_fixations(sets: Sequence[FixationSet]) -> FixationSet:
    if not sets:
        raise ValidationError("no fixation sets to merge")
    canvas = sets[0].canvas
    if any(s.canvas != canvas for s in sets):
        raise ValidationError("cannot merge fixation sets on different canvases")
    return FixationSet(
        sets[0].stimulus_id,
        np.concatenate([s.xs for s in sets]),
        np.concatenate([s.ys for s in sets]),
        np.concatenate([s.observers for s in sets]),
        canvas,
    )


@dataclass(frozen=True)
class VisualAngleCalibration:
    pixels_per_degree_h: float = 56.91
    pixels_per_degree_v: float = 56.55
    sigma_pixels: int = 57

    def __post_init__(self):
        if self.sigma_pixels < 1:
            raise ValidationError("sigma_pixels must be >= 1")
        if self.pixels_per_degree_h <= 0 or self.pixels_per_degree_v <= 0:
            raise ValidationError("pixels_per_degree must be positive")


# ---------------------------------------------------------------------------
# geometry


@dataclass(frozen=True, eq=False)
class AffineMap:
    """3x3 matrix acting on row vectors ``[x y 1] @ m`` (source -> destination)."""

    m: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        m = np.asarray(self.m, dtype=np.float64)
        if m.shape != (3, 3):
            raise ValidationError(f"AffineMap needs a 3x3 matrix, got {m.shape}")
        if not np.array_equal(m[:, 2], [0.0, 0.0, 1.0]):
            raise ValidationError("third column of an affine matrix must be (0, 0, 1)")
        object.__setattr__(self, "m", _frozen(m))

    @classmethod
    def identity(cls) -> "AffineMap":
        return cls(np.eye(3))

    @classmethod
    def translation(cls, tx, ty) -> "AffineMap":
        return cls(np.array([[1.0, 0, 0], [0, 1.0, 0], [tx, ty, 1.0]]))

    @classmethod
    def scaling(cls, sx, sy=None) -> "AffineMap":
        sy = sx if sy is None else sy
        return cls(np.array([[sx, 0, 0], [0, sy, 0], [0, 0, 1.0]]))

    @classmethod
    def rotation(cls, degrees) -> "AffineMap":
        """Counter-clockwise as displayed (y axis points down)."""
        t = math.radians(degrees)
        c, s = math.cos(t), math.sin(t)
        return cls(np.array([[c, -s, 0], [s, c, 0], [0, 0, 1.0]]))

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.m[:2, :2]))

    def then(self, other: "AffineMap") -> "AffineMap":
        """Apply ``self`` first, then ``other``."""
        return AffineMap(self.m @ other.m)

    def inverse(self) -> "AffineMap":
        if abs(self.det) < 1e-12:
            raise GazeBenchError("affine map is singular")
        inv = np.linalg.inv(self.m)
        inv[:, 2] = (0.0, 0.0, 1.0)
        return AffineMap(inv)

    def apply(self, xs, ys) -> tuple[np.ndarray, np.ndarray]:
        xs = np.asarray(xs, dtype=np.float64)
        ys = np.asarray(ys, dtype=np.float64)
        m = self.m
        return xs * m[0, 0] + ys * m[1, 0] + m[2, 0], xs * m[0, 1] + ys * m[1, 1] + m[2, 1]


def loose_frame(amap: AffineMap, width: int, height: int) -> tuple[AffineMap, int, int]:
    """Output geometry of ``amap`` under a loose bounding box.

    Returns the full source->output-pixel map and the output ``(width, height)``,
    each side being the ceiling of the mapped extent's hull.
    """
    cx = np.array([-0.5, width - 0.5, -0.5, width - 0.5])
    cy = np.array([-0.5, -0.5, height - 0.5, height - 0.5])
    hx, hy = amap.apply(cx, cy)
    ext_w, ext_h = hx.max() - hx.min(), hy.max() - hy.min()
    out_w = max(1, math.ceil(ext_w - 1e-9))
    out_h = max(1, math.ceil(ext_h - 1e-9))
    ox = hx.min() + (ext_w - out_w) / 2.0 + 0.5
    oy = hy.min() + (ext_h - out_h) / 2.0 + 0.5
    return amap.then(AffineMap.translation(-ox, -oy)), out_w, out_h


def warp(data: np.ndarray, full_map: AffineMap, out_w: int, out_h: int, fill: float) -> np.ndarray:
    """Inverse-map bilinear warp of an (H, W) or (H, W, C) array."""
    squeeze = data.ndim == 2
    src = np.ascontiguousarray(data[:, :, None] if squeeze else data, dtype=np.float64)
    inv = full_map.inverse()
    v, u = np.mgrid[0:out_h, 0:out_w].astype(np.float64)
    xs, ys = inv.apply(u, v)
    out = _kernels.bilinear_sample(src, np.ascontiguousarray(xs), np.ascontiguousarray(ys), float(fill))
    return out[:, :, 0] if squeeze else out


def apply_affine(img: ColorImage, amap: AffineMap, fill: float = DEFAULT_FILL, bbox="loose") -> ColorImage:
    """Warp ``img`` by ``amap`` with bilinear interpolation.

    ``bbox`` is ``"loose"`` (output sized to the mapped hull) or a fixed
    ``(width, height)`` in which destination coordinates are used verbatim.
    """
    if abs(amap.det) < 1e-12:
        raise GazeBenchError("cannot warp by a singular affine map")
    if isinstance(bbox, str):
        if bbox != "loose":
            raise GazeBenchError(f"unknown bbox mode {bbox!r}")
        full, out_w, out_h = loose_frame(amap, img.width, img.height)
    else:
        out_w, out_h = (int(v) for v in bbox)
        full = amap
    return ColorImage(np.clip(warp(img.data, full, out_w, out_h, fill), 0.0, 1.0))


@dataclass(frozen=True)
class Placement:
    """Where resized content lands on a canvas.

    Pixel extents scale by ``scale_x``/``scale_y`` and the content rectangle
    starts at ``(offset_x, offset_y)``.
    """

    scale_x: float
    scale_y: float
    offset_x: int
    offset_y: int
    content_w: int
    content_h: int
    canvas_w: int
    canvas_h: int

    def affine(self) -> AffineMap:
        """Source-pixel -> canvas-pixel map consistent with pixel-extent scaling."""
        return AffineMap(
            np.array(
                [
                    [self.scale_x, 0, 0],
                    [0, self.scale_y, 0],
                    [0.5 * self.scale_x - 0.5 + self.offset_x, 0.5 * self.scale_y - 0.5 + self.offset_y, 1.0],
                ]
            )
        )


def fit_placement(width: int, height: int, canvas_w: int, canvas_h: int) -> Placement:
    """Largest aspect-preserving fit of a ``width x height`` image, centered."""
    if canvas_w < 1 or canvas_h < 1:
        raise GazeBenchError("canvas must be at least 1x1")
    s = min(canvas_w / width, canvas_h / height)
    cw = min(canvas_w, max(1, int(math.floor(width * s + 0.5))))
    ch = min(canvas_h, max(1, int(math.floor(height * s + 0.5))))
    return Placement(s, s, (canvas_w - cw) // 2, (canvas_h - ch) // 2, cw, ch, canvas_w, canvas_h)


def scaled_placement(width: int, height: int, factor: float) -> Placement:
    """Content resized by ``factor`` and centered on the original canvas."""
    cw = max(1, int(math.floor(width * factor + 0.5)))
    ch = max(1, int(math.floor(height * factor + 0.5)))
    return Placement(factor, factor, (width - cw) // 2, (height - ch) // 2, cw, ch, width, height)


def place(data: np.ndarray, pl: Placement, fill: float) -> np.ndarray:
    """Resample ``data`` into the content rectangle of ``pl``; the rest is ``fill``."""
    h, w = data.shape[:2]
    squeeze = data.ndim == 2
    src = np.ascontiguousarray(data[:, :, None] if squeeze else data, dtype=np.float64)
    out = np.full((pl.canvas_h, pl.canvas_w, src.shape[2]), fill, dtype=np.float64)
    ys = pl.offset_y, pl.offset_y + pl.content_h
    xs = pl.offset_x, pl.offset_x + pl.content_w
    if (pl.content_w, pl.content_h) == (w, h):
        out[ys[0] : ys[1], xs[0] : xs[1]] = src
    else:
        v, u = np.mgrid[0 : pl.content_h, 0 : pl.content_w].astype(np.float64)
        sx = np.clip((u + 0.5) / pl.scale_x - 0.5, 0, w - 1)
        sy = np.clip((v + 0.5) / pl.scale_y - 0.5, 0, h - 1)
        out[ys[0] : ys[1], xs[0] : xs[1]] = _kernels.bilinear_sample(src, sx, sy, float(fill))
    return out[:, :, 0] if squeeze else out


def pad_to_canvas(img: ColorImage, canvas_w: int = DEFAULT_CANVAS[0], canvas_h: int = DEFAULT_CANVAS[1],
                  fill: float = DEFAULT_FILL) -> ColorImage:
    """Scale ``img`` to fit the canvas (aspect preserved) and center it on gray.

    The scale factor and offsets are available from :func:`fit_placement`.
    """
    pl = fit_placement(img.width, img.height, canvas_w, canvas_h)
    return ColorImage(np.clip(place(img.data, pl, fill), 0.0, 1.0))


def to_grayscale(img: ColorImage) -> LuminanceGrid:
    r, g, b = LUMA_WEIGHTS
    d = img.data
    return LuminanceGrid(np.clip(r * d[:, :, 0] + g * d[:, :, 1] + b * d[:, :, 2], 0.0, 1.0))


def to_uint8(a) -> np.ndarray:
    """Round half away from zero onto 0..255."""
    a = np.clip(np.asarray(a, dtype=np.float64), 0.0, 1.0)
    return np.floor(a * 255.0 + 0.5).astype(np.uint8)


def gaussian_kernel1d(sigma: float, truncate: float = 3.0) -> np.ndarray:
    radius = int(truncate * sigma + 0.5)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def gaussian_blur(a: np.ndarray, sigma: float, truncate: float = 3.0) -> np.ndarray:
    """Separable Gaussian blur with zero padding, truncated and renormalized kernel."""
    a = np.asarray(a, dtype=np.float64)
    k = gaussian_kernel1d(sigma, truncate)
    out = fftconvolve(a, k[:, None], mode="same", axes=0)
    out = fftconvolve(out, k[None, :], mode="same", axes=1)
    return out


# ---------------------------------------------------------------------------
# file I/O

FIXATION_COLUMNS = ("stimulus_id", "observer_id", "x", "y")


def read_fixations_csv(path, canvases: Mapping[str, tuple[int, int]] | tuple[int, int]) -> dict[str, FixationSet]:
    """Load ``stimulus_id,observer_id,x,y`` rows into per-stimulus sets.

    ``canvases`` is either one ``(width, height)`` for every stimulus or a
    mapping from stimulus id to its canvas.
    """
    rows: dict[str, list] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != FIXATION_COLUMNS:
            raise ValidationError(f"{path}: expected header {','.join(FIXATION_COLUMNS)}, got {reader.fieldnames}")
        for i, row in enumerate(reader, start=2):
            try:
                rows.setdefault(row["stimulus_id"], []).append(
                    (float(row["x"]), float(row["y"]), int(row["observer_id"]))
                )
            except (TypeError, ValueError) as exc:
                raise ValidationError(f"{path}:{i}: malformed fixation row ({exc})") from None
    out = {}
    for sid, pts in rows.items():
        if isinstance(canvases, Mapping):
            if sid not in canvases:
                raise ValidationError(f"{path}: fixation rows reference unknown stimulus {sid!r}")
            canvas = canvases[sid]
        else:
            canvas = canvases
        out[sid] = FixationSet.from_points(sid, pts, canvas)
    return out


def write_fixations_csv(path, sets: Iterable[FixationSet]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FIXATION_COLUMNS)
        for s in sets:
            for x, y, o in zip(s.xs, s.ys, s.observers):
                w.writerow([s.stimulus_id, int(o), repr(float(x)), repr(float(y))])


def save_density_png(path, dm: DensityMap | np.ndarray) -> None:
    """16-bit grayscale PNG, max mapped to 65535."""
    a = np.asarray(dm, dtype=np.float64)
    peak = a.max()
    q = np.zeros(a.shape, np.uint16) if peak <= 0 else np.floor(a / peak * 65535.0 + 0.5).astype(np.uint16)
    Image.fromarray(q).save(path, format="PNG")


def load_density_png(path, frame: str | None = None) -> DensityMap:
    with Image.open(path) as im:
        a = np.asarray(im).astype(np.float64)
    if a.ndim == 3:
        a = a[:, :, :3].mean(axis=2)
    return DensityMap.normalized(a, "sum-to-one", frame)


def load_grid_png(path) -> np.ndarray:
    """Any PNG as a float (H, W) array scaled to [0, 1] by its bit depth."""
    with Image.open(path) as im:
        mode = im.mode
        a = np.asarray(im)
    a = a.astype(np.float64)
    if a.ndim == 3:
        a = a[:, :, :3] @ np.asarray(LUMA_WEIGHTS)
    scale = 65535.0 if mode.startswith("I") else 255.0
    return a / scale
