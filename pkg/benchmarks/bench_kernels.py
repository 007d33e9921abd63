#!/usr/bin/env python3
"""Time the numba kernels against the pure-numpy fallback.

    python benchmarks/bench_kernels.py --out benchmarks/results.csv

Each kernel runs on fixed-seed inputs; numba compilation is excluded by a
warm-up call.  Outputs of the two paths are compared and the largest
absolute difference is reported next to the timings.  With ``--end-to-end``
a rotation, a Canny pass and a few training steps are also timed in
subprocesses, once with ``GAZEBENCH_DISABLE_JIT=1`` and once without.
"""
import argparse
import csv
import os
import subprocess
import sys
import timeit

import numpy as np

from gazebench._kernels import _numba, _numpy


def _cases(scale):
    rng = np.random.default_rng(0)
    h, w = int(270 * scale), int(480 * scale)
    img = rng.random((h, w, 3))
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    th = np.deg2rad(30.0)
    xs = np.cos(th) * xx - np.sin(th) * yy + 40.0
    ys = np.sin(th) * xx + np.cos(th) * yy - 40.0
    levels = rng.uniform(0.0, 255.0, h * w)
    gx, gy = rng.normal(size=(2, h, w))
    mag = np.hypot(gx, gy)
    thin = _numpy.non_max_suppression(mag, gx, gy)
    hi = np.quantile(thin[thin > 0], 0.8)
    xp = rng.normal(size=(1, 32, 66, 66))
    cols = _numpy.im2col(xp, 4, 2, 32, 32)
    return [
        ("bilinear_sample", f"{w}x{h}x3", (img, xs, ys, 0.5)),
        ("soft_histogram", f"{h * w}", (levels, 255, 1.0)),
        ("non_max_suppression", f"{w}x{h}", (mag, gx, gy)),
        ("hysteresis", f"{w}x{h}", (thin, 0.4 * hi, hi)),
        ("im2col", "1x32x66x66 k4 s2", (xp, 4, 2, 32, 32)),
        ("col2im", "1x32x66x66 k4 s2", (cols, 32, 66, 66, 4, 2, 32, 32)),
    ]


def _time(fn, args, repeat, number):
    t = timeit.repeat(lambda: fn(*args), repeat=repeat, number=number)
    return np.asarray(t) / number


def bench_kernels(scale, repeat, number):
    rows = []
    for name, size, args in _cases(scale):
        ref = getattr(_numpy, name)(*args)
        fast = getattr(_numba, name)(*args)  # compiles
        diff = float(np.max(np.abs(np.asarray(ref, float) - np.asarray(fast, float))))
        t_np = _time(getattr(_numpy, name), args, repeat, number)
        t_nb = _time(getattr(_numba, name), args, repeat, number)
        for backend, t in (("numpy", t_np), ("numba", t_nb)):
            rows.append({
                "kernel": name, "size": size, "backend": backend,
                "best_s": t.min(), "median_s": float(np.median(t)),
                "speedup_vs_numpy": np.median(t_np) / np.median(t), "max_abs_diff": diff,
            })
        print(f"{name:20s} {size:18s} numpy {np.median(t_np) * 1e3:9.3f} ms  "
              f"numba {np.median(t_nb) * 1e3:9.3f} ms  x{np.median(t_np) / np.median(t_nb):6.2f}  "
              f"diff {diff:.1e}")
    return rows


END_TO_END = """
import time, numpy as np
from gazebench import _kernels
from gazebench.core import ColorImage
from gazebench.transforms import get_record, apply_transform
from gazebench.gazegan import GeneratorConfig, synthetic_set, train
img = ColorImage(np.random.default_rng(0).random((540, 960, 3)))
data = synthetic_set(4, 64, 0)
for task, fn in (("rotate", lambda: apply_transform(get_record("Rotation1"), img)),
                 ("canny", lambda: apply_transform(get_record("Boundary"), img)),
                 ("train_5_steps", lambda: train(data, GeneratorConfig.variant("v4"), 5))):
    fn()
    t0 = time.perf_counter(); fn(); print(task, _kernels.BACKEND, time.perf_counter() - t0)
"""


def bench_end_to_end():
    rows = []
    for flag in ("1", "0"):
        env = dict(os.environ, GAZEBENCH_DISABLE_JIT=flag)
        out = subprocess.run([sys.executable, "-c", END_TO_END], env=env, check=True,
                             capture_output=True, text=True).stdout
        for line in out.split("\n"):
            if line.strip():
                task, backend, secs = line.split()
                rows.append({"kernel": task, "size": "end-to-end", "backend": backend,
                             "best_s": float(secs), "median_s": float(secs)})
    base = {r["kernel"]: r["median_s"] for r in rows if r["backend"] == "numpy"}
    for r in rows:
        r["speedup_vs_numpy"] = base[r["kernel"]] / r["median_s"]
        r["max_abs_diff"] = ""
        print(f"{r['kernel']:20s} {'end-to-end':18s} {r['backend']:6s} {r['median_s'] * 1e3:9.1f} ms")
    return rows


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--out", default="benchmarks/results.csv")
    p.add_argument("--scale", type=float, default=1.0, help="image-size multiplier for the raster kernels")
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--number", type=int, default=3)
    p.add_argument("--end-to-end", action="store_true")
    args = p.parse_args(argv)

    rows = bench_kernels(args.scale, args.repeat, args.number)
    if args.end_to_end:
        rows += bench_end_to_end()
    fields = ["kernel", "size", "backend", "best_s", "median_s", "speedup_vs_numpy", "max_abs_diff"]
    with open(args.out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fields, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
