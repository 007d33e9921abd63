"""Pure-numpy implementations of the hot kernels.

These are the reference path; the numba module mirrors every signature.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage


def bilinear_sample(img, xs, ys, fill):
    """Sample ``img`` (H, W, C) at float coordinates (xs, ys).

    Pixel centers sit on integer coordinates.  Samples whose coordinate lies
    outside ``[0, W-1] x [0, H-1]`` receive ``fill``.
    """
    h, w, c = img.shape
    out = np.empty(xs.shape + (c,), dtype=np.float64)
    inside = (xs >= 0.0) & (xs <= w - 1) & (ys >= 0.0) & (ys <= h - 1)
    x = np.where(inside, xs, 0.0)
    y = np.where(inside, ys, 0.0)
    x0 = np.minimum(np.floor(x).astype(np.intp), max(w - 2, 0))
    y0 = np.minimum(np.floor(y).astype(np.intp), max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (x - x0)[..., None]
    fy = (y - y0)[..., None]
    top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
    out[...] = top * (1.0 - fy) + bot * fy
    out[~inside] = fill
    return out


def soft_histogram(levels, n_bins, delta):
    """Triangular-kernel histogram counts (unnormalized) over ``n_bins + 1`` nodes."""
    t = levels / delta
    m = np.minimum(np.floor(t).astype(np.intp), n_bins)
    frac = t - m
    counts = np.bincount(m, weights=1.0 - frac, minlength=n_bins + 1)
    upper = m < n_bins
    counts += np.bincount(m[upper] + 1, weights=frac[upper], minlength=n_bins + 1)
    return counts


def non_max_suppression(mag, gx, gy):
    """Thin gradient magnitudes along the quantized gradient direction.

    A pixel survives when it is strictly greater than its backward neighbour
    and not smaller than its forward neighbour; the asymmetry breaks plateau
    ties so an ideal step yields a one-pixel line.
    """
    h, w = mag.shape
    ang = np.rad2deg(np.arctan2(gy, gx)) % 180.0
    sector = np.zeros(mag.shape, dtype=np.intp)
    sector[(ang >= 22.5) & (ang < 67.5)] = 1
    sector[(ang >= 67.5) & (ang < 112.5)] = 2
    sector[(ang >= 112.5) & (ang < 157.5)] = 3
    dx = np.array([1, 1, 0, -1])[sector]
    dy = np.array([0, 1, 1, 1])[sector]
    padded = np.pad(mag, 1)
    rows, cols = np.indices(mag.shape)
    fwd = padded[rows + 1 + dy, cols + 1 + dx]
    bwd = padded[rows + 1 - dy, cols + 1 - dx]
    keep = (mag > bwd) & (mag >= fwd) & (mag > 0.0)
    return np.where(keep, mag, 0.0)


def hysteresis(thin, low, high):
    weak = thin > low
    labels, n = ndimage.label(weak, structure=np.ones((3, 3), dtype=bool))
    if n == 0:
        return np.zeros(thin.shape, dtype=bool)
    strong_labels = np.unique(labels[(thin > high) & weak])
    return np.isin(labels, strong_labels[strong_labels > 0])


def im2col(xp, k, stride, out_h, out_w):
    """(B, C, Hp, Wp) padded input -> (B, C*k*k, out_h*out_w) patch matrix."""
    b, c = xp.shape[:2]
    win = sliding_window_view(xp, (k, k), axis=(2, 3))
    win = win[:, :, : stride * (out_h - 1) + 1 : stride, : stride * (out_w - 1) + 1 : stride]
    return np.ascontiguousarray(win.transpose(0, 1, 4, 5, 2, 3)).reshape(b, c * k * k, out_h * out_w)


def col2im(cols, c, hp, wp, k, stride, out_h, out_w):
    """Adjoint of :func:`im2col`: scatter-add patches back onto a padded canvas."""
    b = cols.shape[0]
    cols = cols.reshape(b, c, k, k, out_h, out_w)
    out = np.zeros((b, c, hp, wp), dtype=np.float64)
    for i in range(k):
        for j in range(k):
            out[:, :, i : i + stride * out_h : stride, j : j + stride * out_w : stride] += cols[:, :, i, j]
    return out
