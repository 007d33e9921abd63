"""Adam, a synthetic blob dataset and the alternating GAN training loop."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..core import FixationSet, GazeBenchError, gaussian_blur
from .autograd import Tensor, attach, avg_pool2, sum_scalars
from .histogram import HistogramSpec
from .losses import (
    LossWeights,
    adversarial_grads,
    adversarial_loss,
    content_loss,
    generator_adv_grad,
    generator_adv_loss,
)
from .networks import (
    DiscriminatorConfig,
    GeneratorConfig,
    _sub,
    discriminator_forward,
    generator_forward,
    generator_outputs,
    init_discriminator,
    init_generator,
)

DISCRIMINATORS = ("fine", "coarse")


class TrainingError(GazeBenchError):
    """Raised when a loss or parameter becomes non-finite."""


class Adam:
    """Adaptive-moment optimizer over a dict of parameter tensors."""

    def __init__(self, params: Mapping[str, Tensor], lr: float = 2e-4, beta1: float = 0.5,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = dict(params)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in self.params.items()}

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def step(self):
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for k in sorted(self.params):
            p = self.params[k]
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            p.data = p.data - self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


# ---------------------------------------------------------------------------
# data


@dataclass(frozen=True)
class ToySample:
    """One training item: image (3, H, W) in [0, 1], max-to-one density (H, W), fixations."""

    sample_id: str
    image: np.ndarray
    density: np.ndarray
    fixations: FixationSet


def synthetic_set(n: int = 8, size: int = 64, seed: int = 0, n_fixations: int = 24) -> list[ToySample]:
    """Images with one bright disk on a smooth background; gaze is a Gaussian blob on the disk."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    out = []
    for i in range(n):
        bg = np.stack([gaussian_blur(rng.random((size, size)), size / 8.0) for _ in range(3)])
        bg = 0.25 + 0.3 * (bg - bg.min()) / (np.ptp(bg) + 1e-12)
        r = rng.uniform(size / 12.0, size / 7.0)
        cx, cy = rng.uniform(r + 2, size - r - 3, size=2)
        disk = ((xx - cx) ** 2 + (yy - cy) ** 2) <= r * r
        color = rng.uniform(0.7, 1.0, size=3) * rng.permutation([1.0, 1.0, 0.2])
        img = np.where(disk[None], color[:, None, None], bg)
        sigma = 0.8 * r
        dens = np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * sigma * sigma))
        pts = rng.normal([cx, cy], sigma, size=(n_fixations, 2))
        pts = np.clip(pts, 0, size - 1)
        fix = FixationSet(f"toy{i:02d}", pts[:, 0], pts[:, 1], np.arange(n_fixations), (size, size))
        out.append(ToySample(f"toy{i:02d}", img, dens / dens.max(), fix))
    return out


# ---------------------------------------------------------------------------
# training


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    adv_weight: float = 1.0
    saturating: bool = False
    weights: LossWeights = field(default_factory=LossWeights)
    normalize_hist: bool = True
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class GanState:
    gen_cfg: GeneratorConfig
    disc_cfg: DiscriminatorConfig
    train_cfg: TrainConfig
    gen: dict[str, Tensor]
    disc: dict[str, Tensor]
    opt_g: Adam
    opt_d: Adam
    step: int = 0

    @classmethod
    def create(cls, gen_cfg: GeneratorConfig, disc_cfg: DiscriminatorConfig = DiscriminatorConfig(),
               train_cfg: TrainConfig = TrainConfig()) -> "GanState":
        gen = init_generator(gen_cfg, train_cfg.seed)
        disc = {}
        for name in DISCRIMINATORS[: 2 if gen_cfg.local_global else 1]:
            disc.update(init_discriminator(disc_cfg, train_cfg.seed, prefix=name))
        kw = dict(lr=train_cfg.lr, beta1=train_cfg.beta1, beta2=train_cfg.beta2)
        return cls(gen_cfg, disc_cfg, train_cfg, gen, disc, Adam(gen, **kw), Adam(disc, **kw))


@dataclass(frozen=True)
class StepRecord:
    step: int
    loss_d: float
    loss_g_adv: float
    content: float
    terms: Mapping[str, float]


def _check(value: float, what: str, step: int):
    if not np.isfinite(value):
        raise TrainingError(f"step {step}: {what} is non-finite ({value})")


def _disc_outputs(state: GanState, img: Tensor, maps: Sequence[Tensor]) -> list[Tensor]:
    """Fine discriminator on the full-resolution map, coarse one on the global map."""
    outs = []
    for name, smap in zip(DISCRIMINATORS, maps):
        if smap.shape[2:] != img.shape[2:]:
            img = avg_pool2(img)
        outs.append(discriminator_forward(img, smap, state.disc_cfg, _sub(state.disc, name)))
    return outs


def _real_maps(gt: np.ndarray, n: int) -> list[Tensor]:
    maps = [Tensor(gt)]
    while len(maps) < n:
        maps.append(avg_pool2(maps[-1]))
    return maps


def to_batch(samples: Sequence[ToySample]) -> tuple[Tensor, np.ndarray, list[FixationSet]]:
    img = Tensor(np.stack([s.image for s in samples]))
    gt = np.stack([s.density for s in samples])[:, None]
    return img, gt, [s.fixations for s in samples]


def train_step(batch: Sequence[ToySample], state: GanState) -> StepRecord:
    """One alternation: discriminators on loss_D, then the generator on L_cont + loss_G."""
    tc = state.train_cfg
    img, gt, fixes = to_batch(batch)
    maps = generator_outputs(img, state.gen_cfg, state.gen)
    sm = maps[0]

    # discriminators, generator outputs held fixed
    state.opt_d.zero_grad()
    reals = _disc_outputs(state, img, _real_maps(gt, len(maps)))
    fakes = _disc_outputs(state, img, [m.detach() for m in maps])
    nodes, loss_d = [], 0.0
    for d_real, d_fake in zip(reals, fakes):
        ld, _ = adversarial_loss(d_real.data, d_fake.data, tc.saturating)
        gr = adversarial_grads(d_real.data, d_fake.data, tc.saturating)
        # the value is carried by the first node; the second only routes its gradient
        nodes += [attach(d_real, ld, gr["d_real"]), attach(d_fake, 0.0, gr["d_fake"])]
        loss_d += ld
    _check(loss_d, "discriminator loss", state.step)
    sum_scalars(nodes).backward()
    state.opt_d.step()

    # generators, through the updated discriminators
    state.opt_g.zero_grad()
    c_val, c_grad, terms = content_loss(sm.data, gt, fixes, tc.weights, HistogramSpec(), tc.normalize_hist,
                                        return_terms=True)
    _check(c_val, "content loss", state.step)
    nodes, weights, loss_adv = [attach(sm, c_val, c_grad)], [1.0], 0.0
    for d_fake in _disc_outputs(state, img, maps):
        lg = generator_adv_loss(d_fake.data, tc.saturating)
        nodes.append(attach(d_fake, lg, generator_adv_grad(d_fake.data, tc.saturating)))
        weights.append(tc.adv_weight)
        loss_adv += lg
    _check(loss_adv, "generator adversarial loss", state.step)
    sum_scalars(nodes, weights).backward()
    state.opt_g.step()
    for name, p in state.gen.items():
        if not np.all(np.isfinite(p.data)):
            raise TrainingError(f"step {state.step}: parameter {name} became non-finite")
    state.opt_d.zero_grad()
    state.step += 1
    return StepRecord(state.step, loss_d, loss_adv, c_val, dict(terms))


def evaluate_content(state: GanState, data: Sequence[ToySample]) -> float:
    """Mean content loss of the current generator over ``data``."""
    vals = []
    for s in data:
        img, gt, fixes = to_batch([s])
        sm = generator_forward(img, state.gen_cfg, state.gen)
        vals.append(content_loss(sm.data, gt, fixes, state.train_cfg.weights, HistogramSpec(),
                                 state.train_cfg.normalize_hist)[0])
    return float(np.mean(vals))


@dataclass(frozen=True)
class TrainResult:
    state: GanState
    records: list[StepRecord]
    initial_content: float
    final_content: float

    @property
    def relative_reduction(self) -> float:
        return (self.initial_content - self.final_content) / abs(self.initial_content)


def train(data: Sequence[ToySample], gen_cfg: GeneratorConfig, steps: int,
          train_cfg: TrainConfig = TrainConfig(), disc_cfg: DiscriminatorConfig = DiscriminatorConfig(),
          state: GanState | None = None) -> TrainResult:
    """Run ``steps`` alternations with batch size 1, visiting items in seeded epoch order."""
    if not data:
        raise GazeBenchError("training set is empty")
    state = state or GanState.create(gen_cfg, disc_cfg, train_cfg)
    order_rng = np.random.default_rng([train_cfg.seed, 1])
    initial = evaluate_content(state, data)
    records = []
    order: list[int] = []
    for _ in range(steps):
        if not order:
            order = list(order_rng.permutation(len(data)))
        records.append(train_step([data[order.pop(0)]], state))
    return TrainResult(state, records, initial, evaluate_content(state, data))


def ablation(data: Sequence[ToySample], steps: int, train_cfg: TrainConfig = TrainConfig(),
             variants: Sequence[str] = ("v1", "v2", "v3", "v4"), **gen_overrides) -> dict[str, TrainResult]:
    """Train each generator variant on the same data and seed."""
    return {v: train(data, GeneratorConfig.variant(v, **gen_overrides), steps, train_cfg) for v in variants}
