"""Soft luminance histograms and the alternative chi-square distance.

Every forward function here has a matching ``*_backward`` that maps an
upstream gradient to the gradient of its input.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import _kernels
from ..core import DegenerateInputError, GazeBenchError

ACS_EPS = 1e-8


@dataclass(frozen=True)
class HistogramSpec:
    """``n + 1`` uniformly spaced nodes ``b_k = 255 k / n`` over [0, 255]."""

    n: int = 255
    eps: float = ACS_EPS

    def __post_init__(self):
        if self.n < 1:
            raise GazeBenchError("a histogram needs at least two nodes")

    @property
    def delta(self) -> float:
        return 255.0 / self.n

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n + 1) * self.delta


def _levels(values) -> np.ndarray:
    lv = np.ravel(np.asarray(values, dtype=np.float64))
    if lv.size == 0:
        raise GazeBenchError("cannot histogram an empty map")
    if not np.all(np.isfinite(lv)) or lv.min() < 0.0 or lv.max() > 255.0:
        raise GazeBenchError("histogram input must lie in [0, 255]")
    return lv


def hist_estimate(levels, spec: HistogramSpec = HistogramSpec()) -> np.ndarray:
    """Triangular-kernel soft histogram normalized to sum to one.

    Each value splits its unit mass between the two nearest nodes in
    proportion to proximity; a value on the top node counts fully there.
    """
    lv = _levels(levels)
    counts = _kernels.soft_histogram(lv, spec.n, spec.delta)
    return counts / lv.size


def hist_backward(levels, grad_p: np.ndarray, spec: HistogramSpec = HistogramSpec()) -> np.ndarray:
    """Gradient w.r.t. the input levels given ``dL/dp``.

    Zero where a level sits exactly on a node (the kernel's kinks).
    """
    shape = np.shape(levels)
    lv = _levels(levels)
    t = lv / spec.delta
    m = np.minimum(np.floor(t).astype(np.int64), spec.n)
    on_node = (t - m) == 0.0
    upper = np.minimum(m + 1, spec.n)
    g = (grad_p[upper] - grad_p[m]) / (lv.size * spec.delta)
    g[on_node] = 0.0
    return g.reshape(shape)


def minmax_normalize(p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    lo, hi = p.min(), p.max()
    if hi == lo:
        raise DegenerateInputError("min-max normalization of a constant vector")
    return (p - lo) / (hi - lo)


def minmax_backward(p, grad_out: np.ndarray) -> np.ndarray:
    """Gradient through :func:`minmax_normalize`, routed via the arg-min and arg-max."""
    p = np.asarray(p, dtype=np.float64)
    i_lo, i_hi = int(np.argmin(p)), int(np.argmax(p))
    rng = p[i_hi] - p[i_lo]
    if rng == 0:
        raise DegenerateInputError("min-max normalization of a constant vector")
    pbar = (p - p[i_lo]) / rng
    g = grad_out / rng
    g[i_lo] -= np.sum(grad_out * (1.0 - pbar)) / rng
    g[i_hi] -= np.sum(grad_out * pbar) / rng
    return g


def acs_loss(p, q, eps: float = ACS_EPS) -> tuple[float, np.ndarray]:
    """Alternative chi-square distance and its gradient w.r.t. ``p``."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise GazeBenchError(f"histogram lengths differ: {p.shape} vs {q.shape}")
    d = p - q
    den = p + q + eps
    value = 2.0 * np.sum(d * d / den)
    grad = 2.0 * (2.0 * d * den - d * d) / (den * den)
    return float(value), grad


def to_levels(m: np.ndarray) -> tuple[np.ndarray, float, int]:
    """Scale a nonnegative map so its maximum is 255; returns (levels, max, argmax)."""
    flat = np.ravel(m)
    k = int(np.argmax(flat))
    peak = flat[k]
    if not peak > 0:
        raise DegenerateInputError("histogram pipeline needs a map with a positive maximum")
    # the peak maps to exactly 255 even when the division rounds up
    return np.minimum(255.0 * m / peak, 255.0), float(peak), k


def acs_pipeline(sm: np.ndarray, gt: np.ndarray, spec: HistogramSpec = HistogramSpec(),
                 normalize: bool = True) -> tuple[float, np.ndarray]:
    """ACS between the histograms of ``sm`` and ``gt`` with gradient w.r.t. ``sm``.

    Both maps are scaled to a 255 maximum, histogrammed, optionally min-max
    normalized, then compared.
    """
    lv, peak, k = to_levels(sm)
    p = hist_estimate(lv, spec)
    q = hist_estimate(to_levels(gt)[0], spec)
    pn, qn = (minmax_normalize(p), minmax_normalize(q)) if normalize else (p, q)
    value, g = acs_loss(pn, qn, spec.eps)
    if normalize:
        g = minmax_backward(p, g)
    gl = hist_backward(lv, g, spec)
    # levels = 255 * sm / sm[k]
    gs = gl * (255.0 / peak)
    gs.flat[k] -= np.sum(gl * sm) * 255.0 / (peak * peak)
    return value, gs
