"""Run manifests: what was run, with which settings, on which bytes."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .. import __version__

TOOL = "gaze-bench"


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def tree_digests(path, exclude: Iterable = ()) -> dict[str, str]:
    """sha256 of a file, or of every file below a directory keyed by relative path."""
    p = Path(path)
    if p.is_file():
        return {p.name: file_digest(p)}
    skip = {Path(e).resolve() for e in exclude}
    out = {}
    for f in sorted(q for q in p.rglob("*") if q.is_file()):
        if f.resolve() not in skip:
            out[f.relative_to(p).as_posix()] = file_digest(f)
    return out


@dataclass
class RunManifest:
    """Record of one CLI run.

    Holds no timestamps or absolute paths, so identical runs write identical
    manifests.
    """

    command: str
    config: Mapping
    seeds: Mapping[str, int]
    version: str = __version__
    tool: str = TOOL
    inputs: dict[str, dict[str, str]] = field(default_factory=dict)
    outputs: dict[str, dict[str, str]] = field(default_factory=dict)

    def add_input(self, label: str, path) -> None:
        self.inputs[label] = tree_digests(path)

    def add_output(self, label: str, path, exclude: Iterable = ()) -> None:
        self.outputs[label] = tree_digests(path, exclude)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, default=str) + "\n"

    def write(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json())
        return path

    @classmethod
    def read(cls, path) -> "RunManifest":
        return cls(**json.loads(Path(path).read_text()))
