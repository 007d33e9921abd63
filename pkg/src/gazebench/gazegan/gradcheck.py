"""Finite-difference verification of the analytic gradients."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .autograd import Tensor, mul, total
from .histogram import HistogramSpec, acs_loss, hist_estimate, to_levels
from .losses import LossWeights, content_loss
from .networks import CscConfig, csc_forward

FD_STEP = 1e-5
SCALE_FLOOR = 1e-3
TOLERANCES = {"acs": 1e-6, "csc": 1e-5, "content": 1e-4}

# central-difference stencils: order -> ((offset in units of h, weight), ...) / h
STENCILS = {
    2: ((1, 0.5), (-1, -0.5)),
    4: ((2, -1 / 12), (1, 8 / 12), (-1, -8 / 12), (-2, 1 / 12)),
}

# op(inputs) -> (value, {group: gradient}); kink(inputs_plus, inputs_minus) -> True to skip a coordinate
Op = Callable[[Mapping[str, np.ndarray]], tuple[float, Mapping[str, np.ndarray]]]
Kink = Callable[[Mapping[str, np.ndarray], Mapping[str, np.ndarray]], bool]


@dataclass(frozen=True)
class GradCheckReport:
    """Per-group error ``max|analytic - numeric| / max(max|analytic|, max|numeric|, 1e-3)``.

    The floor keeps gradients that are identically zero (for example an
    attention bias the softmax ignores) from being judged on round-off.
    """

    op: str
    tolerance: float
    errors: Mapping[str, float] = field(default_factory=dict)
    skipped: int = 0

    @property
    def max_error(self) -> float:
        return max(self.errors.values()) if self.errors else 0.0

    @property
    def passed(self) -> bool:
        return self.max_error <= self.tolerance


def _relative(a: np.ndarray, n: np.ndarray) -> float:
    scale = max(np.abs(a).max(), np.abs(n).max(), SCALE_FLOOR)
    return float(np.abs(a - n).max() / scale)


def grad_check(op: Op, inputs: Mapping[str, np.ndarray], tolerance: float, name: str = "op",
               h: float = FD_STEP, kink: Kink | None = None, order: int = 4) -> GradCheckReport:
    """Compare ``op``'s analytic gradients with central differences of step ``h``.

    ``order`` selects the 3-point (2) or 5-point (4) central stencil.
    Coordinates flagged by ``kink`` (the stencil straddles a
    non-differentiable point) are left out of both sides.
    """
    stencil = STENCILS[order]
    reach = max(o for o, _ in stencil)
    base = {k: np.array(v, dtype=np.float64) for k, v in inputs.items()}
    _, analytic = op(base)
    errors = {}
    skipped = 0
    for group, grad in analytic.items():
        x = base[group]
        numeric = np.zeros_like(x)
        keep = np.ones(x.shape, dtype=bool)
        for idx in np.ndindex(x.shape):
            orig = x[idx]
            if kink:
                x[idx] = orig + reach * h
                hi = {k: v.copy() for k, v in base.items()}
                x[idx] = orig - reach * h
                if kink(hi, base):
                    keep[idx] = False
                    skipped += 1
            acc = 0.0
            for off, wgt in stencil:
                x[idx] = orig + off * h
                acc += wgt * op(base)[0]
            x[idx] = orig
            numeric[idx] = acc / h
        errors[group] = _relative(np.asarray(grad)[keep], numeric[keep]) if keep.any() else 0.0
    return GradCheckReport(name, tolerance, errors, skipped)


# ---------------------------------------------------------------------------
# the three standard checks


def check_acs(seed: int, n: int = 256) -> GradCheckReport:
    rng = np.random.default_rng(seed)
    q = rng.random(n)

    def op(inp):
        v, g = acs_loss(inp["p"], q)
        return v, {"p": g}

    return grad_check(op, {"p": rng.random(n)}, TOLERANCES["acs"], "acs")


def check_csc(seed: int) -> GradCheckReport:
    """Weighted sum of the CSC output, differentiated w.r.t. inputs, kernels and biases."""
    rng = np.random.default_rng(seed)
    cfg = CscConfig(1, surround_channels=3, center_channels=2, unify_channels=3)
    inputs = {k: rng.normal(0.0, 0.5, s) for k, s in cfg.param_shapes().items()}
    inputs["f_s"] = rng.normal(size=(1, 3, 3, 3))
    inputs["f_c"] = rng.normal(size=(1, 2, 6, 6))
    weights = rng.normal(size=(1, 3, 6, 6))

    def op(inp):
        ts = {k: Tensor(v, requires_grad=True) for k, v in inp.items()}
        out = total(mul(csc_forward(ts["f_s"], ts["f_c"], cfg, ts), Tensor(weights)))
        out.backward()
        return float(out.data), {k: t.grad for k, t in ts.items()}

    return grad_check(op, inputs, TOLERANCES["csc"], "csc")


def _content_kink(spec: HistogramSpec):
    def signature(s):
        lv, _, k = to_levels(s)
        p = hist_estimate(lv, spec)
        return np.floor(lv / spec.delta), k, int(np.argmax(p))

    def kink(plus, minus):
        a, b = signature(plus["sm"]), signature(minus["sm"])
        return not (np.array_equal(a[0], b[0]) and a[1:] == b[1:])

    return kink


def check_content(seed: int, size: int = 8, weights: LossWeights = LossWeights()) -> GradCheckReport:
    rng = np.random.default_rng(seed)
    gt = rng.uniform(0.05, 1.0, (size, size))
    fix = np.zeros((size, size))
    fix.flat[rng.choice(size * size, size=5, replace=False)] = 1.0
    spec = HistogramSpec()

    def op(inp):
        v, g = content_loss(inp["sm"], gt, fix, weights, spec)
        return v, {"sm": g}

    return grad_check(op, {"sm": rng.uniform(0.05, 1.0, (size, size))}, TOLERANCES["content"], "content",
                      kink=_content_kink(spec))


CHECKS = {"acs": check_acs, "csc": check_csc, "content": check_content}


def run_suite(op: str = "all", seeds: int = 100, first_seed: int = 0) -> dict[str, list[GradCheckReport]]:
    names = list(CHECKS) if op == "all" else [op]
    for n in names:
        if n not in CHECKS:
            raise ValueError(f"unknown gradient check {n!r}; choose from all, {', '.join(CHECKS)}")
    return {n: [CHECKS[n](s) for s in range(first_seed, first_seed + seeds)] for n in names}
