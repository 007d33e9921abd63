"""Checkpoints: a numpy archive of named parameters plus a JSON config."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..core import GazeBenchError
from .losses import LossWeights
from .networks import DiscriminatorConfig, GeneratorConfig
from .train import GanState, TrainConfig

FORMAT_VERSION = 1
PARAMS_FILE = "params.npz"
CONFIG_FILE = "config.json"


def save_checkpoint(directory, state: GanState, extra: dict | None = None) -> Path:
    """Write ``params.npz`` (``gen/<name>``, ``disc/<name>``) and ``config.json``."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    arrays = {f"gen/{k}": p.data for k, p in sorted(state.gen.items())}
    arrays.update({f"disc/{k}": p.data for k, p in sorted(state.disc.items())})
    arrays["__format_version__"] = np.array(FORMAT_VERSION)
    np.savez(out / PARAMS_FILE, **arrays)
    config = {
        "format_version": FORMAT_VERSION,
        "step": state.step,
        "generator": state.gen_cfg.to_dict(),
        "discriminator": state.disc_cfg.to_dict(),
        "train": state.train_cfg.to_dict(),
        "extra": extra or {},
    }
    (out / CONFIG_FILE).write_text(json.dumps(config, indent=2, sort_keys=True) + "\n")
    return out


def load_checkpoint(directory) -> GanState:
    """Rebuild a :class:`GanState` (fresh optimizer moments) from :func:`save_checkpoint` output."""
    src = Path(directory)
    try:
        config = json.loads((src / CONFIG_FILE).read_text())
        archive = np.load(src / PARAMS_FILE)
    except (OSError, ValueError) as exc:
        raise GazeBenchError(f"cannot read checkpoint in {src}: {exc}") from exc
    with archive:
        version = int(archive["__format_version__"]) if "__format_version__" in archive.files else None
        if version != FORMAT_VERSION or config.get("format_version") != FORMAT_VERSION:
            raise GazeBenchError(f"unsupported checkpoint format version {version}")
        tc = dict(config["train"])
        tc["weights"] = LossWeights(**tc["weights"])
        state = GanState.create(GeneratorConfig(**config["generator"]),
                                DiscriminatorConfig(**config["discriminator"]), TrainConfig(**tc))
        for prefix, params in (("gen/", state.gen), ("disc/", state.disc)):
            stored = {k[len(prefix):] for k in archive.files if k.startswith(prefix)}
            if stored != set(params):
                raise GazeBenchError(f"checkpoint parameters do not match the configured networks ({prefix})")
            for k in params:
                params[k].data = np.array(archive[prefix + k], dtype=np.float64)
    state.step = int(config.get("step", 0))
    return state


__all__ = ["FORMAT_VERSION", "load_checkpoint", "save_checkpoint"]
