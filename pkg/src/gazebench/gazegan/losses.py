"""Content and adversarial losses with hand-derived gradients."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from ..core import DegenerateInputError, FixationSet, GazeBenchError
from ..metrics import EPS
from .histogram import HistogramSpec, acs_pipeline

ADV_CLAMP = 1e-7
TERMS = ("L1", "KL", "CC", "NSS", "ACS")


@dataclass(frozen=True)
class LossWeights:
    """Weights of the L1, KL, CC, NSS and ACS terms of the content loss."""

    w1: float = 1.0
    w2: float = 10.0
    w3: float = -2.0
    w4: float = -2.0
    w5: float = 1.0

    def __post_init__(self):
        if not all(np.isfinite(v) for v in asdict(self).values()):
            raise GazeBenchError("loss weights must be finite")

    def as_tuple(self) -> tuple[float, ...]:
        return (self.w1, self.w2, self.w3, self.w4, self.w5)


# ---------------------------------------------------------------------------
# individual terms: each returns (value, d value / d s)


def l1_term(s, g):
    d = s - g
    return float(np.abs(d).mean()), np.sign(d) / d.size


def kl_term(s, g, eps: float = EPS):
    """KL of the sum-normalized prediction from the sum-normalized target."""
    ss, gs = s.sum(), g.sum()
    if not (ss > 0 and gs > 0):
        raise DegenerateInputError("KL needs maps with positive mass")
    sh, gh = s / ss, g / gs
    ratio = gh / (sh + eps)
    value = float(np.sum(gh * np.log(ratio + eps)))
    u = -gh * ratio / ((ratio + eps) * (sh + eps))
    return value, (u - np.sum(u * sh)) / ss


def cc_term(s, g):
    if np.ptp(s) == 0 or np.ptp(g) == 0:
        raise DegenerateInputError("CC is undefined for a constant map")
    sc, gc = s - s.mean(), g - g.mean()
    ns, ng = np.sqrt(np.sum(sc * sc)), np.sqrt(np.sum(gc * gc))
    r = float(np.sum(sc * gc) / (ns * ng))
    return r, gc / (ns * ng) - r * sc / (ns * ns)


def nss_term(s, mask):
    n = s.size
    if np.ptp(s) == 0:
        raise DegenerateInputError("NSS is undefined for a constant map")
    mu, sd = s.mean(), s.std()
    a = mask / mask.sum()
    value = float(np.sum(a * (s - mu)) / sd)
    return value, (a - 1.0 / n) / sd - value * (s - mu) / (n * sd * sd)


def _fix_mask(fix, shape) -> np.ndarray:
    h, w = shape
    if isinstance(fix, FixationSet):
        if len(fix) == 0:
            raise GazeBenchError("fixation set is empty")
        f = fix if fix.canvas == (w, h) else fix.rescaled((w, h))
        mask = f.raster() > 0
    else:
        mask = np.asarray(fix) > 0
        if mask.shape != (h, w):
            raise GazeBenchError(f"fixation raster {mask.shape} does not match map {shape}")
    if not mask.any():
        raise GazeBenchError("fixation raster has no fixated pixel")
    return mask.astype(np.float64)


def _single(s, g, mask, w: LossWeights, spec: HistogramSpec, normalize_hist: bool):
    terms = {}
    grad = np.zeros_like(s)
    total = 0.0
    funcs = (
        lambda: l1_term(s, g),
        lambda: kl_term(s, g),
        lambda: cc_term(s, g),
        lambda: nss_term(s, mask),
        lambda: acs_pipeline(s, g, spec, normalize_hist),
    )
    for name, weight, fn in zip(TERMS, w.as_tuple(), funcs):
        if weight == 0.0:
            continue
        v, gv = fn()
        terms[name] = v
        total += weight * v
        grad += weight * gv
    return total, grad, terms


def _planes(x) -> np.ndarray:
    a = np.asarray(getattr(x, "data", x), dtype=np.float64)
    if a.ndim == 2:
        return a[None, None]
    if a.ndim == 4 and a.shape[1] == 1:
        return a
    raise GazeBenchError(f"expected an (H, W) or (B, 1, H, W) map, got shape {a.shape}")


def content_loss(sm, gt_den, gt_fix, w: LossWeights = LossWeights(), spec: HistogramSpec = HistogramSpec(),
                 normalize_hist: bool = True, return_terms: bool = False):
    """Weighted sum of L1, KL, CC, NSS and ACS, averaged over the batch.

    ``sm`` and ``gt_den`` are (H, W) or (B, 1, H, W); ``gt_fix`` is a
    :class:`FixationSet` (rescaled onto the map grid if needed), a binary
    raster, or a sequence of either with one entry per batch item.  Returns
    ``(value, grad)`` with ``grad`` shaped like ``sm``, plus the unweighted
    batch-mean terms when ``return_terms`` is set.
    """
    s4, g4 = _planes(sm), _planes(gt_den)
    if s4.shape != g4.shape:
        raise GazeBenchError(f"prediction {s4.shape} and target {g4.shape} differ in shape")
    b = s4.shape[0]
    if isinstance(gt_fix, FixationSet) or (isinstance(gt_fix, np.ndarray) and gt_fix.ndim == 2):
        fixes: Sequence = [gt_fix] * b
    else:
        fixes = list(gt_fix)
    if len(fixes) != b:
        raise GazeBenchError(f"{len(fixes)} fixation entries for a batch of {b}")
    if not np.all(np.isfinite(s4)):
        raise GazeBenchError("prediction contains non-finite values")
    value = 0.0
    grad = np.zeros_like(s4)
    acc: dict[str, float] = {}
    for i in range(b):
        s, g = s4[i, 0], g4[i, 0]
        v, gr, terms = _single(s, g, _fix_mask(fixes[i], s.shape), w, spec, normalize_hist)
        value += v / b
        grad[i, 0] = gr / b
        for k, t in terms.items():
            acc[k] = acc.get(k, 0.0) + t / b
    grad = grad.reshape(np.shape(getattr(sm, "data", sm)))
    if return_terms:
        return value, grad, acc
    return value, grad


# ---------------------------------------------------------------------------
# adversarial


def _clamped(d):
    d = np.asarray(getattr(d, "data", d), dtype=np.float64)
    c = np.clip(d, ADV_CLAMP, 1.0 - ADV_CLAMP)
    return c, (d >= ADV_CLAMP) & (d <= 1.0 - ADV_CLAMP)


def generator_adv_loss(d_fake, saturating: bool = False) -> float:
    """``-mean(log d_fake)``, or the min-max form ``mean(log(1 - d_fake))``."""
    f, _ = _clamped(d_fake)
    return float(np.mean(np.log1p(-f)) if saturating else -np.mean(np.log(f)))


def generator_adv_grad(d_fake, saturating: bool = False) -> np.ndarray:
    """Gradient of :func:`generator_adv_loss`; zero where the clamp is active."""
    f, inside = _clamped(d_fake)
    g = -1.0 / (f.size * (1.0 - f)) if saturating else -1.0 / (f.size * f)
    return np.where(inside, g, 0.0)


def adversarial_loss(d_real, d_fake, saturating: bool = False) -> tuple[float, float]:
    """Discriminator and generator losses on patch probabilities.

    ``loss_D = -mean(log d_real) - mean(log(1 - d_fake))``.  The generator
    loss is the non-saturating ``-mean(log d_fake)`` unless ``saturating``.
    Probabilities are clamped to [1e-7, 1 - 1e-7] before the logs.
    """
    r, _ = _clamped(d_real)
    f, _ = _clamped(d_fake)
    loss_d = -np.mean(np.log(r)) - np.mean(np.log1p(-f))
    return float(loss_d), generator_adv_loss(d_fake, saturating)


def adversarial_grads(d_real, d_fake, saturating: bool = False) -> dict[str, np.ndarray]:
    """Gradients of :func:`adversarial_loss` w.r.t. the patch outputs.

    Keys: ``d_real`` and ``d_fake`` for the discriminator loss, ``g_fake``
    for the generator loss.  Zero where the clamp is active.
    """
    r, r_in = _clamped(d_real)
    f, f_in = _clamped(d_fake)
    return {
        "d_real": np.where(r_in, -1.0 / (r.size * r), 0.0),
        "d_fake": np.where(f_in, 1.0 / (f.size * (1.0 - f)), 0.0),
        "g_fake": generator_adv_grad(d_fake, saturating),
    }
