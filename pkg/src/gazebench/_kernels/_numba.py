"""numba-compiled twins of :mod:`gazebench._kernels._numpy`.

Loops run in a fixed order so results are reproducible run to run.
"""
import math

import numpy as np
from numba import njit


@njit(cache=True)
def bilinear_sample(img, xs, ys, fill):
    h, w, c = img.shape
    oh, ow = xs.shape
    out = np.empty((oh, ow, c), dtype=np.float64)
    for r in range(oh):
        for q in range(ow):
            x = xs[r, q]
            y = ys[r, q]
            if x < 0.0 or x > w - 1 or y < 0.0 or y > h - 1:
                for ch in range(c):
                    out[r, q, ch] = fill
                continue
            x0 = min(int(math.floor(x)), max(w - 2, 0))
            y0 = min(int(math.floor(y)), max(h - 2, 0))
            x1 = min(x0 + 1, w - 1)
            y1 = min(y0 + 1, h - 1)
            fx = x - x0
            fy = y - y0
            for ch in range(c):
                top = img[y0, x0, ch] * (1.0 - fx) + img[y0, x1, ch] * fx
                bot = img[y1, x0, ch] * (1.0 - fx) + img[y1, x1, ch] * fx
                out[r, q, ch] = top * (1.0 - fy) + bot * fy
    return out


@njit(cache=True)
def soft_histogram(levels, n_bins, delta):
    counts = np.zeros(n_bins + 1, dtype=np.float64)
    for i in range(levels.size):
        t = levels[i] / delta
        m = min(int(math.floor(t)), n_bins)
        frac = t - m
        counts[m] += 1.0 - frac
        if m < n_bins:
            counts[m + 1] += frac
    return counts


@njit(cache=True)
def non_max_suppression(mag, gx, gy):
    h, w = mag.shape
    out = np.zeros((h, w), dtype=np.float64)
    for r in range(h):
        for q in range(w):
            m = mag[r, q]
            if m <= 0.0:
                continue
            ang = math.degrees(math.atan2(gy[r, q], gx[r, q])) % 180.0
            if ang >= 22.5 and ang < 67.5:
                dx, dy = 1, 1
            elif ang >= 67.5 and ang < 112.5:
                dx, dy = 0, 1
            elif ang >= 112.5 and ang < 157.5:
                dx, dy = -1, 1
            else:
                dx, dy = 1, 0
            rf, qf = r + dy, q + dx
            rb, qb = r - dy, q - dx
            fwd = mag[rf, qf] if 0 <= rf < h and 0 <= qf < w else 0.0
            bwd = mag[rb, qb] if 0 <= rb < h and 0 <= qb < w else 0.0
            if m > bwd and m >= fwd:
                out[r, q] = m
    return out


@njit(cache=True)
def hysteresis(thin, low, high):
    h, w = thin.shape
    out = np.zeros((h, w), dtype=np.bool_)
    stack = np.empty((h * w, 2), dtype=np.int64)
    for r0 in range(h):
        for q0 in range(w):
            if out[r0, q0] or not thin[r0, q0] > high:
                continue
            out[r0, q0] = True
            top = 0
            stack[0, 0] = r0
            stack[0, 1] = q0
            top = 1
            while top > 0:
                top -= 1
                r = stack[top, 0]
                q = stack[top, 1]
                for dr in range(-1, 2):
                    for dq in range(-1, 2):
                        rr = r + dr
                        qq = q + dq
                        if 0 <= rr < h and 0 <= qq < w and not out[rr, qq] and thin[rr, qq] > low:
                            out[rr, qq] = True
                            stack[top, 0] = rr
                            stack[top, 1] = qq
                            top += 1
    return out


@njit(cache=True)
def im2col(xp, k, stride, out_h, out_w):
    b, c = xp.shape[0], xp.shape[1]
    cols = np.empty((b, c * k * k, out_h * out_w), dtype=np.float64)
    for n in range(b):
        for ch in range(c):
            for i in range(k):
                for j in range(k):
                    row = (ch * k + i) * k + j
                    for oy in range(out_h):
                        for ox in range(out_w):
                            cols[n, row, oy * out_w + ox] = xp[n, ch, oy * stride + i, ox * stride + j]
    return cols


@njit(cache=True)
def col2im(cols, c, hp, wp, k, stride, out_h, out_w):
    b = cols.shape[0]
    out = np.zeros((b, c, hp, wp), dtype=np.float64)
    for n in range(b):
        for ch in range(c):
            for i in range(k):
                for j in range(k):
                    row = (ch * k + i) * k + j
                    for oy in range(out_h):
                        for ox in range(out_w):
                            out[n, ch, oy * stride + i, ox * stride + j] += cols[n, row, oy * out_w + ox]
    return out
