"""``gaze-bench`` command-line interface.

Exit status is 0 on success, 2 for invalid inputs or usage and 1 for any
other failure.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .. import __version__
from ..core import GazeBenchError, ValidationError
from ..transforms import GROUP_IDS
from . import commands
from .layout import DatasetLayout, GroupEntry, ingest
from .manifest import RunManifest
from .report import read_long_csv, read_matrix_csv, write_long_csv, write_matrix_csv

__all__ = [
    "DatasetLayout",
    "GroupEntry",
    "RunManifest",
    "build_parser",
    "ingest",
    "main",
    "read_long_csv",
    "read_matrix_csv",
    "write_long_csv",
    "write_matrix_csv",
]

EXIT_OK, EXIT_FAILURE, EXIT_INVALID = 0, 1, 2

# run options, accepted both before and after the subcommand name
_GLOBAL_DEFAULTS = {"seed": 0, "jobs": 1, "manifest": None}


def _add_globals(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--seed", type=int, default=d, help="base random seed (default 0)")
    p.add_argument("--jobs", type=int, default=d, help="worker processes for per-stimulus work (default 1)")
    p.add_argument("--manifest", default=d, metavar="PATH",
                   help="where to write the run manifest (default: next to the outputs)")


def _add_sigma(p):
    p.add_argument("--sigma", type=int, default=None, metavar="PX",
                   help="Gaussian sigma in pixels for smoothing fixations (default 57, one visual degree)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gaze-bench",
        description="Transform stimuli, score saliency maps, measure gaze invariance and train a toy GazeGAN.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _add_globals(parser, suppress=True)
    run_opts = argparse.ArgumentParser(add_help=False)
    _add_globals(run_opts, suppress=True)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    def add(name, help_, func):
        p = sub.add_parser(name, help=help_, description=help_, parents=[run_opts])
        p.set_defaults(func=func)
        return p

    p = add("transform", "apply catalog transformations to a directory of stimuli", commands.cmd_transform)
    p.add_argument("--in", dest="input", required=True, metavar="DIR", help="directory of reference PNG stimuli")
    p.add_argument("--out", required=True, metavar="DIR", help="output root; writes OUT/<Group>/<id>.png")
    p.add_argument("--group", default="all", choices=["all", *GROUP_IDS], metavar="ID|all",
                   help="one group id or 'all' (default)")
    p.add_argument("--crop-mode", choices=["remove", "keep"], default="remove",
                   help="cropping groups: drop the band and resize back (remove) or fill it (keep)")

    p = add("evaluate", "score predicted saliency maps against fixations", commands.cmd_evaluate)
    p.add_argument("--pred", required=True, metavar="DIR", help="predicted maps, one <id>.png per stimulus")
    p.add_argument("--fix", required=True, metavar="CSV", help="fixations CSV (stimulus_id,observer_id,x,y)")
    p.add_argument("--gt-density", metavar="DIR", help="ground-truth densities; default smooths the fixations")
    p.add_argument("--stimuli", metavar="DIR",
                   help="stimulus images, for fixation coordinates recorded on a different grid than --pred")
    p.add_argument("--baseline", metavar="PNG", help="baseline map for IG (default uniform)")
    p.add_argument("--metrics", default="cc,sim,kl,nss,auc_judd,auc_borji,sauc,ig",
                   help="comma-separated subset of cc,sim,kl,nss,auc_judd,auc_borji,sauc,ig")
    p.add_argument("--group", default="Reference", help="group label written to the report")
    p.add_argument("--out", required=True, metavar="CSV", help="report with stimulus_id,group,metric,value")
    _add_sigma(p)

    p = add("invariance", "compare every group's gaze with the Reference gaze", commands.cmd_invariance)
    p.add_argument("--dataset", required=True, metavar="DIR", help="dataset root, one subdirectory per group")
    p.add_argument("--metric", choices=["cc", "sim", "kl"], default="cc")
    p.add_argument("--out", required=True, metavar="CSV", help="matrix CSV, groups ranked best first")
    p.add_argument("--json", metavar="PATH", help="also write the matrix as JSON")
    p.add_argument("--heatmaps", metavar="DIR", help="write the matrix and per-stimulus KL maps as PNG")
    _add_sigma(p)

    p = add("augment", "expand image/label pairs with the valid or invalid transformation set",
            commands.cmd_augment)
    p.add_argument("--images", required=True, metavar="DIR")
    p.add_argument("--labels", required=True, metavar="DIR", help="16-bit gaze maps named like the images")
    p.add_argument("--set", choices=["valid", "invalid"], default="valid")
    p.add_argument("--out", required=True, metavar="DIR", help="writes OUT/<Group>/<id>.png and density/<id>.png")

    p = add("train-toy", "train the desk-scale GazeGAN on a small set", commands.cmd_train_toy)
    p.add_argument("--data", metavar="DIR",
                   help="one group directory with images and fixations.csv (default: synthetic set)")
    p.add_argument("--size", type=int, default=64, help="training resolution (default 64)")
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--variant", choices=["v1", "v2", "v3", "v4"], default="v4")
    p.add_argument("--levels", type=int, default=6, help="U-Net depth; sides must divide by 2**levels")
    p.add_argument("--n-synthetic", type=int, default=8, help="synthetic images when --data is absent")
    p.add_argument("--adv-weight", type=float, default=1.0, help="weight of the adversarial loss")
    p.add_argument("--saturating", action="store_true", help="use the min-max generator loss")
    p.add_argument("--raw-histograms", action="store_true", help="skip min-max normalization of histograms")
    p.add_argument("--out", required=True, metavar="DIR", help="checkpoint directory")
    _add_sigma(p)

    p = add("gradcheck", "compare analytic gradients with finite differences", commands.cmd_gradcheck)
    p.add_argument("--op", choices=["all", "acs", "csc", "content"], default="all")
    p.add_argument("--seeds", type=int, default=100, help="number of random instances per check")
    p.add_argument("--out", metavar="CSV", help="per-seed errors")

    p = add("io-score", "inter-observer consistency per stimulus", commands.cmd_io_score)
    p.add_argument("--dataset", required=True, metavar="DIR")
    p.add_argument("--group", default="Reference", help="group id, comma list, or 'all'")
    p.add_argument("--metric", default="sauc", help="one of cc,sim,kl,nss,auc_judd,auc_borji,sauc,ig")
    p.add_argument("--out", required=True, metavar="CSV")
    _add_sigma(p)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for k, v in _GLOBAL_DEFAULTS.items():
        if not hasattr(args, k):
            setattr(args, k, v)
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "command")}
    man = RunManifest(args.command, config, {"seed": args.seed})
    try:
        if args.jobs < 1:
            raise ValidationError("--jobs must be >= 1")
        default = args.func(args, man)
        target = args.manifest or default
        if target is not None:
            man.write(Path(target))
    except ValidationError as exc:
        print(f"gaze-bench {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (GazeBenchError, OSError) as exc:
        print(f"gaze-bench {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
