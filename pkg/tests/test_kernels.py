import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gazebench._kernels import _numpy

import oracles

_numba = pytest.importorskip("gazebench._kernels._numba")

seeds = st.integers(0, 2**31 - 1)


@settings(max_examples=25, deadline=None)
@given(seeds, st.integers(3, 20), st.integers(3, 20), st.floats(-0.3, 0.3))
def test_bilinear_backends_agree(seed, h, w, angle):
    rng = np.random.default_rng(seed)
    img = rng.random((h, w, 3))
    yy, xx = np.mgrid[0:h, 0:w].astype(float)
    xs = np.cos(angle) * xx - np.sin(angle) * yy + rng.uniform(-2, 2)
    ys = np.sin(angle) * xx + np.cos(angle) * yy + rng.uniform(-2, 2)
    a = _numpy.bilinear_sample(img, xs, ys, 0.5)
    b = _numba.bilinear_sample(img, xs, ys, 0.5)
    assert np.allclose(a, b, rtol=0, atol=1e-12)


def test_bilinear_integer_grid_is_exact():
    img = np.random.default_rng(0).random((5, 7, 3))
    yy, xx = np.mgrid[0:5, 0:7].astype(float)
    for mod in (_numpy, _numba):
        assert np.array_equal(mod.bilinear_sample(img, xx, yy, 0.5), img)


@settings(max_examples=25, deadline=None)
@given(seeds, st.integers(1, 400), st.sampled_from([1, 4, 255]))
def test_soft_histogram_backends_and_oracle(seed, n, bins):
    rng = np.random.default_rng(seed)
    levels = rng.uniform(0, 255, n)
    levels[: n // 4] = np.round(levels[: n // 4])  # exact node hits
    delta = 255.0 / bins
    a = _numpy.soft_histogram(levels, bins, delta)
    b = _numba.soft_histogram(levels, bins, delta)
    assert np.allclose(a, b, rtol=0, atol=1e-9)
    if bins <= 4:
        assert np.allclose(a / n, oracles.soft_histogram(levels, bins), rtol=0, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(seeds, st.integers(4, 30), st.integers(4, 30))
def test_canny_stages_backends_agree(seed, h, w):
    rng = np.random.default_rng(seed)
    gx, gy = rng.normal(size=(2, h, w))
    mag = np.hypot(gx, gy)
    thin_a = _numpy.non_max_suppression(mag, gx, gy)
    thin_b = _numba.non_max_suppression(mag, gx, gy)
    assert np.array_equal(thin_a, thin_b)
    hi = np.quantile(mag, 0.8)
    assert np.array_equal(_numpy.hysteresis(thin_a, 0.4 * hi, hi), _numba.hysteresis(thin_a, 0.4 * hi, hi))


@settings(max_examples=20, deadline=None)
@given(seeds, st.integers(1, 3), st.sampled_from([1, 3, 4]), st.sampled_from([1, 2]), st.integers(6, 12))
def test_im2col_col2im_backends_agree(seed, c, k, stride, size):
    rng = np.random.default_rng(seed)
    xp = rng.normal(size=(2, c, size, size))
    oh = (size - k) // stride + 1
    cols_a = _numpy.im2col(xp, k, stride, oh, oh)
    assert np.array_equal(cols_a, _numba.im2col(xp, k, stride, oh, oh))
    back_a = _numpy.col2im(cols_a, c, size, size, k, stride, oh, oh)
    back_b = _numba.col2im(cols_a, c, size, size, k, stride, oh, oh)
    assert np.allclose(back_a, back_b, rtol=0, atol=1e-12)
    # adjointness: <im2col(x), y> == <x, col2im(y)>
    y = rng.normal(size=cols_a.shape)
    lhs = np.sum(cols_a * y)
    rhs = np.sum(xp * _numpy.col2im(y, c, size, size, k, stride, oh, oh))
    assert lhs == pytest.approx(rhs, rel=1e-10)


@pytest.mark.parametrize("flag,expected", [("1", "numpy"), ("0", "numba")])
def test_env_flag_selects_backend(flag, expected):
    env = dict(os.environ, GAZEBENCH_DISABLE_JIT=flag)
    out = subprocess.run([sys.executable, "-c", "from gazebench import _kernels; print(_kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True).stdout.strip()
    assert out == expected
