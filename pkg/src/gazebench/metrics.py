"""Fixation smoothing and the saliency evaluation metrics.

Maps may be passed as numpy arrays or any of the core raster types.
Location-based metrics (NSS, the AUC family, IG) use the set of distinct
fixated pixels as positives.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    DegenerateInputError,
    DensityMap,
    FixationSet,
    GazeBenchError,
    VisualAngleCalibration,
    gaussian_blur,
    merge_fixations,
)

EPS = 1e-7
METRICS = ("CC", "SIM", "KL", "NSS", "AUC_Judd", "AUC_Borji", "sAUC", "IG")
LOWER_IS_BETTER = frozenset({"KL"})


@dataclass(frozen=True)
class MetricResult:
    metric: str
    value: float

    def __post_init__(self):
        if self.metric not in METRICS:
            raise GazeBenchError(f"unknown metric {self.metric!r}")

    @property
    def higher_is_better(self) -> bool:
        return self.metric not in LOWER_IS_BETTER


@dataclass(frozen=True)
class ShuffleConfig:
    n_splits: int = 100
    negatives_per_split: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.n_splits < 1 or self.negatives_per_split < 1:
            raise GazeBenchError("n_splits and negatives_per_split must be >= 1")


def _arr(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


def _same_shape(a, b):
    if a.shape != b.shape:
        raise GazeBenchError(f"map shapes differ: {a.shape} vs {b.shape}")


def _fixated(sm: np.ndarray, fix: FixationSet) -> np.ndarray:
    """Boolean mask of fixated pixels on ``sm``'s grid."""
    if len(fix) == 0:
        raise GazeBenchError("fixation set is empty")
    if fix.canvas != (sm.shape[1], sm.shape[0]):
        raise GazeBenchError(f"fixation canvas {fix.canvas} does not match map size {sm.shape[::-1]}")
    return fix.raster() > 0


# ---------------------------------------------------------------------------
# fixations -> density


def smooth_fixations(fix: FixationSet, cal: VisualAngleCalibration = VisualAngleCalibration()) -> DensityMap:
    """Blur the binary fixation map with an isotropic Gaussian and sum-normalize."""
    if len(fix) == 0:
        raise GazeBenchError("cannot smooth an empty fixation set")
    blurred = np.clip(gaussian_blur(fix.raster(), cal.sigma_pixels, truncate=3.0), 0.0, None)
    return DensityMap.normalized(blurred, "sum-to-one")


# ---------------------------------------------------------------------------
# distribution-based


def cc(p, q) -> float:
    """Pearson correlation between two maps."""
    a, b = _arr(p), _arr(q)
    _same_shape(a, b)
    # test constancy on the raw values; centering leaves round-off residue
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        raise DegenerateInputError("CC is undefined for a constant map")
    a = a - a.mean()
    b = b - b.mean()
    na, nb = np.sqrt((a * a).sum()), np.sqrt((b * b).sum())
    return float(np.clip((a * b).sum() / (na * nb), -1.0, 1.0))


def _check_sum_to_one(a, name, tol=1e-6):
    if a.min() < 0 or abs(a.sum() - 1.0) > tol:
        raise GazeBenchError(f"{name} must be a nonnegative sum-to-one map (sum={a.sum():.6g})")


def sim(p, q) -> float:
    """Histogram intersection of two sum-to-one maps."""
    a, b = _arr(p), _arr(q)
    _same_shape(a, b)
    _check_sum_to_one(a, "p")
    _check_sum_to_one(b, "q")
    return float(np.minimum(a, b).sum())


def kl_terms(gt, sm, eps: float = EPS) -> np.ndarray:
    """Per-pixel contributions ``gt * ln(gt / (sm + eps) + eps)``."""
    g, s = _arr(gt), _arr(sm)
    _same_shape(g, s)
    return g * np.log(g / (s + eps) + eps)


def kl_div(gt, sm, eps: float = EPS) -> float:
    """KL divergence of ``sm`` from the reference distribution ``gt``."""
    g, s = _arr(gt), _arr(sm)
    _check_sum_to_one(g, "gt")
    _check_sum_to_one(s, "sm")
    return float(kl_terms(g, s, eps).sum())


# ---------------------------------------------------------------------------
# location-based


def nss(sm, fix: FixationSet) -> float:
    """Mean of the z-scored map (population std) over fixated pixels."""
    s = _arr(sm)
    mask = _fixated(s, fix)
    if np.ptp(s) == 0:
        raise DegenerateInputError("NSS is undefined for a constant map")
    return float(((s[mask] - s.mean()) / s.std()).mean())


def roc_auc(pos: np.ndarray, neg: np.ndarray) -> float:
    """Exact area under the ROC curve swept over every distinct threshold.

    Equals P(pos > neg) + P(pos == neg) / 2, computed from a joint sort.
    """
    pos = np.ravel(pos).astype(np.float64)
    neg = np.ravel(neg).astype(np.float64)
    if pos.size == 0 or neg.size == 0:
        raise GazeBenchError("ROC area needs nonempty positive and negative sets")
    neg_sorted = np.sort(neg)
    below = np.searchsorted(neg_sorted, pos, side="left")
    at_or_below = np.searchsorted(neg_sorted, pos, side="right")
    wins = below.sum() + 0.5 * (at_or_below - below).sum()
    return float(wins / (pos.size * neg.size))


def auc_judd(sm, fix: FixationSet) -> float:
    """ROC area with fixated pixels as positives and all other pixels as negatives."""
    s = _arr(sm)
    mask = _fixated(s, fix)
    return roc_auc(s[mask], s[~mask])


def auc_borji(sm, fix: FixationSet, cfg: ShuffleConfig = ShuffleConfig()) -> float:
    """ROC area against uniformly sampled pixels, averaged over random splits."""
    s = _arr(sm)
    mask = _fixated(s, fix)
    pos = s[mask]
    flat = s.ravel()
    rng = np.random.default_rng(cfg.seed)
    scores = []
    for _ in range(cfg.n_splits):
        idx = rng.integers(0, flat.size, size=cfg.negatives_per_split)
        scores.append(roc_auc(pos, flat[idx]))
    return float(np.mean(scores))


def shuffled_pool(other_fix: Sequence[FixationSet], shape) -> np.ndarray:
    """Flat pixel indices of other stimuli's fixations, rescaled onto ``shape``."""
    h, w = shape
    idx = []
    for f in other_fix:
        g = f if f.canvas == (w, h) else f.rescaled((w, h))
        rows, cols = g.pixels()
        idx.append(rows * w + cols)
    if not idx:
        raise GazeBenchError("sAUC needs fixations from at least one other stimulus")
    pool = np.concatenate(idx)
    if pool.size == 0:
        raise GazeBenchError("sAUC negative pool is empty")
    return pool


def sauc(sm, fix: FixationSet, other_fix: Sequence[FixationSet], cfg: ShuffleConfig = ShuffleConfig()) -> float:
    """Shuffled AUC: negatives are drawn from fixations on other stimuli."""
    s = _arr(sm)
    mask = _fixated(s, fix)
    pos = s[mask]
    pool = shuffled_pool(other_fix, s.shape)
    flat = s.ravel()
    rng = np.random.default_rng(cfg.seed)
    scores = []
    for _ in range(cfg.n_splits):
        idx = rng.choice(pool, size=cfg.negatives_per_split, replace=pool.size < cfg.negatives_per_split)
        scores.append(roc_auc(pos, flat[idx]))
    return float(np.mean(scores))


def info_gain(sm, fix: FixationSet, baseline, eps: float = EPS) -> float:
    """Mean log2 likelihood gain of ``sm`` over ``baseline`` at fixated pixels, in bits."""
    s, b = _arr(sm), _arr(baseline)
    _same_shape(s, b)
    _check_sum_to_one(s, "sm")
    _check_sum_to_one(b, "baseline")
    mask = _fixated(s, fix)
    return float(np.mean(np.log2(s[mask] + eps) - np.log2(b[mask] + eps)))


# ---------------------------------------------------------------------------
# inter-observer consistency


def score(metric: str, prediction: DensityMap, held_out: FixationSet, cal: VisualAngleCalibration,
          other_fix: Sequence[FixationSet] = (), baseline=None, cfg: ShuffleConfig = ShuffleConfig()) -> float:
    """Score a predicted density against fixations with any metric in :data:`METRICS`."""
    m = metric.upper()
    pred = prediction.values
    if m == "NSS":
        return nss(pred, held_out)
    if m == "AUC_JUDD":
        return auc_judd(pred, held_out)
    if m == "AUC_BORJI":
        return auc_borji(pred, held_out, cfg)
    if m == "SAUC":
        return sauc(pred, held_out, other_fix, cfg)
    if m == "IG":
        if baseline is None:
            baseline = np.full(pred.shape, 1.0 / pred.size)
        return info_gain(pred, held_out, baseline)
    target = smooth_fixations(held_out, cal).values
    if m == "CC":
        return cc(pred, target)
    if m == "SIM":
        return sim(pred, target)
    if m == "KL":
        return kl_div(target, pred)
    raise GazeBenchError(f"unknown metric {metric!r}")


def io_score(fixs: Sequence[FixationSet], metric: str, cal: VisualAngleCalibration = VisualAngleCalibration(),
             other_fix: Sequence[FixationSet] = (), baseline=None, cfg: ShuffleConfig = ShuffleConfig()) -> float:
    """Leave-one-observer-out consistency for one stimulus.

    ``fixs`` holds one set per observer; each observer is scored against the
    smoothed fixations of all the others and the scores are averaged.
    """
    if len(fixs) < 2:
        raise GazeBenchError("inter-observer scores need at least two observers")
    vals = []
    for i, held in enumerate(fixs):
        rest = merge_fixations([f for j, f in enumerate(fixs) if j != i])
        vals.append(score(metric, smooth_fixations(rest, cal), held, cal, other_fix, baseline, cfg))
    return float(np.mean(vals))
