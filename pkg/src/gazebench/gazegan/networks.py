"""Center-surround connection, generators and the conditional patch discriminator.

Parameters live in flat dicts mapping dotted names to :class:`Tensor`
leaves.  Forward functions are pure given those dicts.

Decoder stages are numbered 1..L from the bottleneck outward.  A CSC module
labelled ``(i, i + 4)`` takes its center from one of the last four decoder
stages and its surround from the stage one resolution step coarser, so the
stride-2 upsample lands exactly on the center grid.  At full depth (L = 8)
the center index equals ``i + 4``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Mapping

import zlib

import numpy as np

from ..core import GazeBenchError
from .autograd import (
    Tensor,
    add,
    avg_pool2,
    concat_channels,
    conv2d,
    conv_transpose2d,
    leaky_relu,
    mul,
    parameter,
    relu,
    sigmoid,
    spatial_softmax,
)

INIT_STD = 0.02
VARIANTS = ("v1", "v2", "v3", "v4")


def _sub(params: Mapping[str, Tensor], prefix: str) -> dict[str, Tensor]:
    n = len(prefix) + 1
    return {k[n:]: v for k, v in params.items() if k.startswith(prefix + ".")}


def init_params(shapes: Mapping[str, tuple], seed: int, std: float = INIT_STD) -> dict[str, Tensor]:
    """Gaussian weights and zero biases.

    Each weight is drawn from a stream keyed by ``seed`` and its own name, so
    a layer shared by two configurations starts from the same values.
    """
    params = {}
    for name in sorted(shapes):
        shape = shapes[name]
        if name.endswith(".b"):
            data = np.zeros(shape)
        else:
            rng = np.random.default_rng([seed, zlib.crc32(name.encode())])
            data = rng.standard_normal(shape) * std
        params[name] = parameter(data, name)
    return params


# ---------------------------------------------------------------------------
# CSC


@dataclass(frozen=True)
class CscConfig:
    """Surround label ``i`` in 1..4 (center ``i + 4``) and channel counts."""

    surround_layer: int
    surround_channels: int
    center_channels: int
    unify_channels: int

    def __post_init__(self):
        if self.surround_layer not in (1, 2, 3, 4):
            raise GazeBenchError(f"surround layer must be 1..4, got {self.surround_layer}")
        if min(self.surround_channels, self.center_channels, self.unify_channels) < 1:
            raise GazeBenchError("CSC channel counts must be positive")

    @property
    def center_layer(self) -> int:
        return self.surround_layer + 4

    def param_shapes(self) -> dict[str, tuple]:
        cs, cc, u = self.surround_channels, self.center_channels, self.unify_channels
        return {
            "up.w": (cs, cs, 3, 3), "up.b": (cs,),
            "ns.w": (u, cs, 1, 1), "ns.b": (u,),
            "nc.w": (u, cc, 1, 1), "nc.b": (u,),
            "na.w": (1, u, 1, 1), "na.b": (1,),
        }  # fmt: skip


def csc_forward(f_s: Tensor, f_c: Tensor, cfg: CscConfig, params: Mapping[str, Tensor],
                return_attention: bool = False):
    """Fuse an upsampled surround map with a center map under spatial attention.

    ``f_cs = N_s(up(f_s)) + N_c(f_c)``; the attention ``A`` is the spatial
    softmax of the one-channel ``N_a(f_cs)``; the output is ``f_cs * A`` with
    ``A`` broadcast over channels.
    """
    up = conv_transpose2d(f_s, params["up.w"], params["up.b"], stride=2, padding=1, output_padding=1)
    if up.shape[2:] != f_c.shape[2:]:
        raise GazeBenchError(f"upsampled surround {up.shape[2:]} does not match center {f_c.shape[2:]}")
    f_cs = add(conv2d(up, params["ns.w"], params["ns.b"]), conv2d(f_c, params["nc.w"], params["nc.b"]))
    att = spatial_softmax(conv2d(f_cs, params["na.w"], params["na.b"]))
    out = mul(f_cs, att)
    return (out, att) if return_attention else out


# ---------------------------------------------------------------------------
# generators


@dataclass(frozen=True)
class GeneratorConfig:
    """Encoder/decoder depth, widths and the optional GazeGAN components.

    ``levels`` counts encoder (and decoder) stages; 6 suits 64x64 inputs and
    8 the full 256x256 design.  The global generator of the local-global
    pair runs one level shallower on the x2-downsampled input.
    """

    levels: int = 6
    base_channels: int = 16
    max_channels: int = 128
    residual_blocks: int = 4
    use_csc: bool = True
    local_global: bool = True
    encoder_slope: float = 0.2
    in_channels: int = 3

    def __post_init__(self):
        if self.levels < 2 or self.base_channels < 1 or self.max_channels < self.base_channels:
            raise GazeBenchError("invalid generator depth or widths")
        core = self.levels - 1 if self.local_global else self.levels
        if self.use_csc and core < 5:
            raise GazeBenchError("CSC needs at least five decoder stages in the (global) generator")
        if self.residual_blocks < 0:
            raise GazeBenchError("residual_blocks must be >= 0")

    @classmethod
    def variant(cls, name: str, **overrides) -> "GeneratorConfig":
        """Ablation variants: v1 plain U-Net, v2 + residual blocks, v3 + CSC, v4 + local-global."""
        table = {
            "v1": dict(residual_blocks=0, use_csc=False, local_global=False),
            "v2": dict(residual_blocks=4, use_csc=False, local_global=False),
            "v3": dict(residual_blocks=4, use_csc=True, local_global=False),
            "v4": dict(residual_blocks=4, use_csc=True, local_global=True),
        }
        if name not in table:
            raise GazeBenchError(f"unknown variant {name!r}; choose from {VARIANTS}")
        return cls(**{**table[name], **overrides})

    @classmethod
    def full_scale(cls, **overrides) -> "GeneratorConfig":
        """Eight levels, for 256x256 inputs."""
        return cls(**{"levels": 8, **overrides})

    @property
    def multiple(self) -> int:
        """Input sides must be divisible by this."""
        return 2 ** self.levels

    def to_dict(self) -> dict:
        return asdict(self)


def _width(cfg: GeneratorConfig, level: int) -> int:
    return min(cfg.base_channels * 2 ** (level - 1), cfg.max_channels)


@dataclass(frozen=True)
class _UNetPlan:
    levels: int
    enc: tuple[int, ...]  # channels of e_1..e_L
    dec: tuple[int, ...]  # channels of f_1..f_L
    centers: tuple[int, ...]  # decoder stages acting as CSC centers
    cscs: dict = field(default_factory=dict)  # center stage -> CscConfig


def _plan(cfg: GeneratorConfig, levels: int) -> _UNetPlan:
    enc = tuple(_width(cfg, k) for k in range(1, levels + 1))
    dec = tuple(enc[levels - d - 1] if d < levels else cfg.base_channels for d in range(1, levels + 1))
    centers = tuple(range(levels - 3, levels + 1)) if cfg.use_csc else ()
    cscs = {d: CscConfig(i + 1, dec[d - 2], dec[d - 1], dec[d - 1]) for i, d in enumerate(centers)}
    return _UNetPlan(levels, enc, dec, centers, cscs)


def _unet_shapes(cfg: GeneratorConfig, levels: int, prefix: str, head: bool) -> dict[str, tuple]:
    plan = _plan(cfg, levels)
    shapes: dict[str, tuple] = {}
    cin = cfg.in_channels
    for k, c in enumerate(plan.enc, 1):
        shapes[f"{prefix}.enc{k}.w"], shapes[f"{prefix}.enc{k}.b"] = (c, cin, 4, 4), (c,)
        cin = c
    for r in range(cfg.residual_blocks):
        for j in (1, 2):
            shapes[f"{prefix}.res{r + 1}.{j}.w"], shapes[f"{prefix}.res{r + 1}.{j}.b"] = (cin, cin, 3, 3), (cin,)
    for d, c in enumerate(plan.dec, 1):
        shapes[f"{prefix}.dec{d}.w"], shapes[f"{prefix}.dec{d}.b"] = (cin, c, 4, 4), (c,)
        # input of the next stage: skip + decoder (+ CSC) features
        skip = plan.enc[levels - d - 1] if d < levels else 0
        cin = skip + c + (plan.cscs[d].unify_channels if d in plan.cscs else 0)
    for d, cc in plan.cscs.items():
        for name, shape in cc.param_shapes().items():
            shapes[f"{prefix}.csc{cc.surround_layer}.{name}"] = shape
    if head:
        shapes[f"{prefix}.head.w"], shapes[f"{prefix}.head.b"] = (1, cin, 3, 3), (1,)
    return shapes


def _local_shapes(cfg: GeneratorConfig) -> dict[str, tuple]:
    c = cfg.base_channels
    return {
        "local.enc1.w": (c, cfg.in_channels, 3, 3), "local.enc1.b": (c,),
        "local.enc2.w": (c, c, 4, 4), "local.enc2.b": (c,),
        "local.dec.w": (2 * c, c, 4, 4), "local.dec.b": (c,),
        "local.head.w": (1, c, 3, 3), "local.head.b": (1,),
    }  # fmt: skip


def generator_shapes(cfg: GeneratorConfig) -> dict[str, tuple]:
    if cfg.local_global:
        return {**_unet_shapes(cfg, cfg.levels - 1, "global", head=True), **_local_shapes(cfg)}
    return _unet_shapes(cfg, cfg.levels, "global", head=True)


def init_generator(cfg: GeneratorConfig, seed: int = 0) -> dict[str, Tensor]:
    return init_params(generator_shapes(cfg), seed)


def _unet(x: Tensor, cfg: GeneratorConfig, levels: int, params: Mapping[str, Tensor], head: bool):
    """Returns (last decoder stage features, saliency head output or None)."""
    plan = _plan(cfg, levels)
    enc = []
    h = x
    for k in range(1, levels + 1):
        h = leaky_relu(conv2d(h, params[f"enc{k}.w"], params[f"enc{k}.b"], stride=2, padding=1), cfg.encoder_slope)
        enc.append(h)
    for r in range(1, cfg.residual_blocks + 1):
        t = relu(conv2d(h, params[f"res{r}.1.w"], params[f"res{r}.1.b"], padding=1))
        h = add(h, conv2d(t, params[f"res{r}.2.w"], params[f"res{r}.2.b"], padding=1))
    dec = []
    for d in range(1, levels + 1):
        f = relu(conv_transpose2d(h, params[f"dec{d}.w"], params[f"dec{d}.b"], stride=2, padding=1))
        dec.append(f)
        groups = [enc[levels - d - 1]] if d < levels else []
        groups.append(f)
        if d in plan.cscs:
            cc = plan.cscs[d]
            groups.append(csc_forward(dec[d - 2], f, cc, _sub(params, f"csc{cc.surround_layer}")))
        h = concat_channels(groups) if len(groups) > 1 else f
    if not head:
        return dec[-1], None
    return dec[-1], sigmoid(conv2d(h, params["head.w"], params["head.b"], padding=1))


def _check_input(img: Tensor, cfg: GeneratorConfig):
    if img.data.ndim != 4 or img.shape[1] != cfg.in_channels:
        raise GazeBenchError(f"generator expects (B, {cfg.in_channels}, H, W), got {img.shape}")
    h, w = img.shape[2:]
    if h % cfg.multiple or w % cfg.multiple:
        raise GazeBenchError(f"input {h}x{w} is not divisible by {cfg.multiple} for {cfg.levels} levels")


def generator_outputs(img: Tensor, cfg: GeneratorConfig, params: Mapping[str, Tensor]) -> list[Tensor]:
    """Saliency maps from fine to coarse.

    One full-resolution map for a single generator; for the local-global
    pair, the local map followed by the global generator's half-resolution
    map.
    """
    _check_input(img, cfg)
    if not cfg.local_global:
        return [_unet(img, cfg, cfg.levels, _sub(params, "global"), head=True)[1]]
    g_feat, g_map = _unet(avg_pool2(img), cfg, cfg.levels - 1, _sub(params, "global"), head=True)
    p = _sub(params, "local")
    s = cfg.encoder_slope
    l1 = leaky_relu(conv2d(img, p["enc1.w"], p["enc1.b"], padding=1), s)
    l2 = leaky_relu(conv2d(l1, p["enc2.w"], p["enc2.b"], stride=2, padding=1), s)
    up = relu(conv_transpose2d(concat_channels([l2, g_feat]), p["dec.w"], p["dec.b"], stride=2, padding=1))
    return [sigmoid(conv2d(up, p["head.w"], p["head.b"], padding=1)), g_map]


def generator_forward(img: Tensor, cfg: GeneratorConfig, params: Mapping[str, Tensor]) -> Tensor:
    """Saliency map in (0, 1) with the input's spatial size, shape (B, 1, H, W)."""
    return generator_outputs(img, cfg, params)[0]


# ---------------------------------------------------------------------------
# discriminator


@dataclass(frozen=True)
class DiscriminatorConfig:
    """Four 4x4 conv layers (strides 2, 2, 2, 1) then a 4x4 logistic head."""

    conv_layers: int = 4
    base_channels: int = 8
    max_channels: int = 64
    image_channels: int = 3
    slope: float = 0.2

    def __post_init__(self):
        if self.conv_layers < 1 or self.base_channels < 1:
            raise GazeBenchError("invalid discriminator config")

    def strides(self) -> tuple[int, ...]:
        return tuple(2 if k < self.conv_layers - 1 else 1 for k in range(self.conv_layers))

    def to_dict(self) -> dict:
        return asdict(self)


def discriminator_shapes(cfg: DiscriminatorConfig, prefix: str = "disc") -> dict[str, tuple]:
    shapes = {}
    cin = cfg.image_channels + 1
    for k in range(cfg.conv_layers):
        c = min(cfg.base_channels * 2**k, cfg.max_channels)
        shapes[f"{prefix}.conv{k + 1}.w"], shapes[f"{prefix}.conv{k + 1}.b"] = (c, cin, 4, 4), (c,)
        cin = c
    shapes[f"{prefix}.head.w"], shapes[f"{prefix}.head.b"] = (1, cin, 4, 4), (1,)
    return shapes


def init_discriminator(cfg: DiscriminatorConfig, seed: int = 0, prefix: str = "disc") -> dict[str, Tensor]:
    return init_params(discriminator_shapes(cfg, prefix), seed)


def discriminator_forward(img: Tensor, smap: Tensor, cfg: DiscriminatorConfig, params: Mapping[str, Tensor]) -> Tensor:
    """Patch grid of real/fake probabilities for a map conditioned on its image.

    ``params`` uses unprefixed keys (``conv1.w`` ... ``head.b``).
    """
    if img.shape[0] != smap.shape[0] or img.shape[2:] != smap.shape[2:]:
        raise GazeBenchError(f"image {img.shape} and map {smap.shape} are not spatially aligned")
    h = concat_channels([img, smap])
    for k, s in enumerate(cfg.strides(), 1):
        h = leaky_relu(conv2d(h, params[f"conv{k}.w"], params[f"conv{k}.b"], stride=s, padding=1), cfg.slope)
    return sigmoid(conv2d(h, params["head.w"], params["head.b"], padding=1))


__all__ = [
    "CscConfig",
    "DiscriminatorConfig",
    "GeneratorConfig",
    "VARIANTS",
    "csc_forward",
    "discriminator_forward",
    "discriminator_shapes",
    "generator_forward",
    "generator_outputs",
    "generator_shapes",
    "init_discriminator",
    "init_generator",
    "init_params",
]
