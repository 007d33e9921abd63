"""Hot-loop kernels with a numba path and a pure-numpy fallback.

The numba path is used when numba imports cleanly, unless the environment
variable ``GAZEBENCH_DISABLE_JIT`` is set to a truthy value.  Both paths are
importable directly (``_numpy`` / ``_numba``) for equivalence tests and the
benchmark script.
"""
import os

from . import _numpy

_DISABLED = os.environ.get("GAZEBENCH_DISABLE_JIT", "").strip().lower() not in ("", "0", "false", "no")

if _DISABLED:
    _impl = _numpy
else:
    try:
        from . import _numba as _impl
    except ImportError:  # numba missing or broken
        _impl = _numpy

BACKEND = "numba" if _impl is not _numpy else "numpy"

bilinear_sample = _impl.bilinear_sample
soft_histogram = _impl.soft_histogram
non_max_suppression = _impl.non_max_suppression
hysteresis = _impl.hysteresis
im2col = _impl.im2col
col2im = _impl.col2im

__all__ = [
    "BACKEND",
    "bilinear_sample",
    "soft_histogram",
    "non_max_suppression",
    "hysteresis",
    "im2col",
    "col2im",
]
