"""Implementations of the ``gaze-bench`` subcommands.

Each command takes the parsed arguments and a :class:`RunManifest` to fill
in, and returns the manifest's default location (or ``None`` when the run has
no output location of its own).
"""
from __future__ import annotations

import sys
import zlib
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from pathlib import Path
from typing import Callable, Iterable, Iterator

import numpy as np
from PIL import Image

from ..analysis import INVALID_SET, VALID_SET, augment_dataset, invariance_matrix, kl_heatmap
from ..core import (
    ColorImage,
    DensityMap,
    GazeBenchError,
    ValidationError,
    VisualAngleCalibration,
    load_density_png,
    load_grid_png,
    read_fixations_csv,
    save_density_png,
)
from ..metrics import (
    ShuffleConfig,
    auc_borji,
    auc_judd,
    cc,
    info_gain,
    io_score,
    kl_div,
    nss,
    sauc,
    sim,
    smooth_fixations,
)
from ..transforms import GROUP_IDS, align_to_reference, apply_transform, get_record
from .layout import DENSITY_DIR, FIXATIONS_FILE, DatasetLayout, ingest, scan_group
from .manifest import RunManifest
from .report import (
    matrix_to_dict,
    save_heatmap_png,
    save_matrix_png,
    write_json,
    write_long_csv,
    write_matrix_csv,
    write_table_csv,
)

MANIFEST_NAME = "manifest.json"

# CLI metric names -> report names
METRIC_NAMES = {
    "cc": "CC", "sim": "SIM", "kl": "KL", "nss": "NSS",
    "auc_judd": "AUC_Judd", "auc_borji": "AUC_Borji", "sauc": "sAUC", "ig": "IG",
}  # fmt: skip


def stimulus_seed(base: int, sid: str) -> int:
    """Per-stimulus seed that does not depend on iteration order or job count."""
    return int(np.random.SeedSequence([base, zlib.crc32(sid.encode())]).generate_state(1)[0])


def pmap(fn: Callable, items: Iterable, jobs: int = 1) -> Iterator:
    """Ordered map over ``items``, in worker processes when ``jobs > 1``."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        yield from map(fn, items)
        return
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        yield from ex.map(fn, items)


def _pngs(directory, what: str) -> dict[str, Path]:
    d = Path(directory)
    if not d.is_dir():
        raise ValidationError(f"{what} directory {d} does not exist")
    found = {p.stem: p for p in sorted(d.glob("*.png"))}
    if not found:
        raise ValidationError(f"{what} directory {d} contains no PNG files")
    return found


def _calibration(args) -> VisualAngleCalibration:
    return VisualAngleCalibration(sigma_pixels=args.sigma) if args.sigma else VisualAngleCalibration()


def _say(msg: str) -> None:
    print(msg, file=sys.stderr)


# ---------------------------------------------------------------------------
# transform


def _transform_one(task, crop_mode: str) -> np.ndarray:
    group, path, seed = task
    img = ColorImage.load(path)
    return apply_transform(get_record(group), img, seed=seed, crop_mode=crop_mode).to_uint8()


def cmd_transform(args, man: RunManifest) -> Path:
    images = _pngs(args.input, "input")
    groups = list(GROUP_IDS) if args.group == "all" else [get_record(args.group).id]
    out = Path(args.out)
    tasks = [(g, path, stimulus_seed(args.seed, sid)) for g in groups for sid, path in images.items()]
    keys = [(g, sid) for g in groups for sid in images]
    fn = partial(_transform_one, crop_mode=args.crop_mode)
    for (g, sid), arr in zip(keys, pmap(fn, tasks, args.jobs)):
        (out / g).mkdir(parents=True, exist_ok=True)
        Image.fromarray(arr, mode="RGB").save(out / g / f"{sid}.png", format="PNG")
    man.seeds.update({sid: stimulus_seed(args.seed, sid) for sid in images})
    man.add_input("images", args.input)
    man.add_output("transformed", out, exclude=[out / MANIFEST_NAME])
    _say(f"wrote {len(tasks)} images for {len(groups)} group(s) to {out}")
    return out / MANIFEST_NAME


# ---------------------------------------------------------------------------
# evaluate


def _prediction(path) -> DensityMap:
    return DensityMap.normalized(load_grid_png(path), "sum-to-one")


def _evaluate_one(task, metrics, cal, cfg, baseline) -> list[tuple[str, float]]:
    sid, pred_path, fix, others, gt_path = task
    pred = _prediction(pred_path)
    s = pred.values
    h, w = s.shape
    f = fix if fix.canvas == (w, h) else fix.rescaled((w, h))
    gt = None
    if {"CC", "SIM", "KL"} & set(metrics):
        gt = load_density_png(gt_path) if gt_path is not None else smooth_fixations(f, cal)
        if gt.shape != s.shape:
            raise ValidationError(f"{sid}: ground-truth density {gt.shape} does not match prediction {s.shape}")
    base = np.full(s.shape, 1.0 / s.size) if baseline is None else baseline
    funcs = {
        "CC": lambda: cc(s, gt.values),
        "SIM": lambda: sim(s, gt.values),
        "KL": lambda: kl_div(gt.values, s),
        "NSS": lambda: nss(s, f),
        "AUC_Judd": lambda: auc_judd(s, f),
        "AUC_Borji": lambda: auc_borji(s, f, cfg),
        "sAUC": lambda: sauc(s, f, others, cfg),
        "IG": lambda: info_gain(s, f, base),
    }
    return [(m, funcs[m]()) for m in metrics]


def _metric_list(spec: str) -> list[str]:
    names = [m.strip().lower() for m in spec.split(",") if m.strip()]
    bad = [m for m in names if m not in METRIC_NAMES]
    if bad or not names:
        raise ValidationError(f"unknown metric(s) {bad or spec!r}; choose from {','.join(METRIC_NAMES)}")
    return [METRIC_NAMES[m] for m in dict.fromkeys(names)]


def cmd_evaluate(args, man: RunManifest) -> Path:
    metrics = _metric_list(args.metrics)
    preds = _pngs(args.pred, "prediction")
    gts = _pngs(args.gt_density, "ground-truth density") if args.gt_density else {}
    canvases = {}
    if args.stimuli:
        stim = _pngs(args.stimuli, "stimulus")
        for sid, p in stim.items():
            with Image.open(p) as im:
                canvases[sid] = im.size
    else:
        for sid, p in preds.items():
            with Image.open(p) as im:
                canvases[sid] = im.size
    fixs = read_fixations_csv(args.fix, canvases)
    missing = sorted(set(preds) - set(fixs))
    if missing:
        raise ValidationError(f"no fixations for predicted stimuli: {', '.join(missing)}")
    if gts and sorted(set(preds) - set(gts)):
        raise ValidationError(f"no ground-truth density for: {', '.join(sorted(set(preds) - set(gts)))}")
    baseline = None
    if args.baseline:
        baseline = DensityMap.normalized(load_grid_png(args.baseline), "sum-to-one").values
    cfg = ShuffleConfig(seed=args.seed)
    tasks = [(sid, preds[sid], fixs[sid], [f for k, f in sorted(fixs.items()) if k != sid], gts.get(sid))
             for sid in sorted(preds)]
    fn = partial(_evaluate_one, metrics=metrics, cal=_calibration(args), cfg=cfg, baseline=baseline)
    rows = []
    for (sid, *_), scores in zip(tasks, pmap(fn, tasks, args.jobs)):
        rows += [(sid, args.group, m, v) for m, v in scores]
    out = write_long_csv(rows, args.out)
    for label, path in (("pred", args.pred), ("fix", args.fix), ("gt_density", args.gt_density),
                        ("stimuli", args.stimuli), ("baseline", args.baseline)):
        if path:
            man.add_input(label, path)
    man.add_output("report", out)
    for m in metrics:
        vals = [v for _, _, mm, v in rows if mm == m]
        _say(f"{m}: mean {np.mean(vals):.4f} over {len(vals)} stimuli")
    return out.with_name(out.name + ".manifest.json")


# ---------------------------------------------------------------------------
# invariance


def _aligned_density(task, cal) -> DensityMap:
    layout, group, sid, fixs, ref_size = task
    dm = layout.density(group, sid, cal, fixs)
    rec = get_record(group)
    if rec.invertible_for_alignment or rec.id == "Reference":
        return align_to_reference(dm, rec, ref_size)
    return dm


def load_invariance_dataset(layout: DatasetLayout, cal: VisualAngleCalibration, jobs: int = 1
                            ) -> dict[str, dict[str, DensityMap]]:
    """Every group's gaze maps, geometric groups aligned back onto the Reference canvas."""
    ref = layout.group("Reference")
    tasks = []
    for name, g in layout.groups.items():
        get_record(name)
        fixs = layout.fixations(name) if set(g.images) - set(g.densities) else None
        for sid in g.stimuli:
            if sid not in ref.sizes:
                raise ValidationError(f"group {name} stimulus {sid} has no Reference image")
            tasks.append((layout, name, sid, fixs, ref.sizes[sid]))
    out: dict[str, dict[str, DensityMap]] = {}
    for (_, name, sid, _, _), dm in zip(tasks, pmap(partial(_aligned_density, cal=cal), tasks, jobs)):
        out.setdefault(name, {})[sid] = dm
    return out


def cmd_invariance(args, man: RunManifest) -> Path:
    layout = ingest(args.dataset)
    data = load_invariance_dataset(layout, _calibration(args), args.jobs)
    matrix = invariance_matrix(data, args.metric)
    out = write_matrix_csv(matrix, args.out)
    if args.json:
        write_json(matrix_to_dict(matrix), args.json)
        man.add_output("json", args.json)
    if args.heatmaps:
        hm = Path(args.heatmaps)
        save_matrix_png(matrix, hm / f"matrix_{matrix.metric}.png")
        for g in matrix.groups:
            if g == "Reference":
                continue
            for sid in matrix.stimuli:
                grid = kl_heatmap(data["Reference"][sid], data[g][sid])
                save_heatmap_png(grid.data, hm / "kl" / g / f"{sid}.png", vmin=-1.0, vmax=1.0)
        man.add_output("heatmaps", hm)
    man.add_input("dataset", args.dataset)
    man.add_output("matrix", out)
    for g in matrix.groups:
        _say(f"{g:>13s}  {matrix.metric} {matrix.group_means[g]:.4f}")
    return out.with_name(out.name + ".manifest.json")


# ---------------------------------------------------------------------------
# augment


def _augment_one(task, which: str) -> list[tuple[np.ndarray, np.ndarray]]:
    img_path, label_path, seed = task
    img = ColorImage.load(img_path)
    gaze = load_density_png(label_path)
    return [(t.to_uint8(), d.values) for t, d in augment_dataset([img], [gaze], which, seed)]


def cmd_augment(args, man: RunManifest) -> Path:
    images = _pngs(args.images, "image")
    labels = _pngs(args.labels, "label")
    unpaired = sorted(set(images) ^ set(labels))
    if unpaired:
        raise ValidationError(f"images and labels are not paired: {', '.join(unpaired)}")
    members = [g for g in (VALID_SET if args.set == "valid" else INVALID_SET) if g != "Reference"]
    out = Path(args.out)
    tasks = [(images[sid], labels[sid], stimulus_seed(args.seed, sid)) for sid in sorted(images)]
    for sid, pairs in zip(sorted(images), pmap(partial(_augment_one, which=args.set), tasks, args.jobs)):
        for g, (img, dens) in zip(members, pairs):
            (out / g / DENSITY_DIR).mkdir(parents=True, exist_ok=True)
            Image.fromarray(img, mode="RGB").save(out / g / f"{sid}.png", format="PNG")
            save_density_png(out / g / DENSITY_DIR / f"{sid}.png", dens)
    man.seeds.update({sid: stimulus_seed(args.seed, sid) for sid in images})
    man.add_input("images", args.images)
    man.add_input("labels", args.labels)
    man.add_output("augmented", out, exclude=[out / MANIFEST_NAME])
    _say(f"wrote {len(images) * len(members)} augmented pairs ({args.set} set) to {out}")
    return out / MANIFEST_NAME


# ---------------------------------------------------------------------------
# train-toy


def load_toy_data(directory, size: int, cal: VisualAngleCalibration):
    """Read one group directory (images, ``fixations.csv``, optional ``density/``) at ``size``x``size``."""
    from ..gazegan.train import ToySample

    d = Path(directory)
    layout = ingest_group(d)
    g = layout.group(d.name)
    fixs = layout.fixations(d.name)
    samples = []
    for sid in g.stimuli:
        if sid not in fixs:
            raise ValidationError(f"{d}: stimulus {sid} has no fixations")
        img = ColorImage.load(g.images[sid])
        small = Image.fromarray(img.to_uint8(), mode="RGB").resize((size, size), Image.BILINEAR)
        image = np.asarray(small, dtype=np.float64).transpose(2, 0, 1) / 255.0
        dens = layout.density(d.name, sid, cal, fixs).values.astype(np.float32)
        dsmall = np.asarray(Image.fromarray(dens, mode="F").resize((size, size), Image.BILINEAR), np.float64)
        dsmall = np.clip(dsmall, 0.0, None)
        if not dsmall.max() > 0:
            raise ValidationError(f"{d}: density of {sid} vanishes at {size}x{size}")
        samples.append(ToySample(sid, image, dsmall / dsmall.max(), fixs[sid].rescaled((size, size))))
    return samples


def ingest_group(directory) -> DatasetLayout:
    """Validate a single group directory as a one-group layout."""
    d = Path(directory)
    if not d.is_dir():
        raise ValidationError(f"data directory {d} does not exist")
    problems: list[str] = []
    entry = scan_group(d, problems, known=True)
    if entry.fixations is None:
        problems.append(f"{d} is missing {FIXATIONS_FILE}")
    if problems:
        raise ValidationError("invalid training directory:\n  " + "\n  ".join(problems))
    return DatasetLayout(d.parent, {d.name: entry})


def cmd_train_toy(args, man: RunManifest) -> Path:
    from ..gazegan import GeneratorConfig, TrainConfig, save_checkpoint, synthetic_set, train

    if args.size < 1 or args.steps < 0:
        raise ValidationError("--size must be positive and --steps nonnegative")
    if args.data:
        data = load_toy_data(args.data, args.size, _calibration(args))
        man.add_input("data", args.data)
    else:
        data = synthetic_set(n=args.n_synthetic, size=args.size, seed=args.seed)
    gen_cfg = GeneratorConfig.variant(args.variant, levels=args.levels)
    tc = TrainConfig(adv_weight=args.adv_weight, saturating=args.saturating,
                     normalize_hist=not args.raw_histograms, seed=args.seed)
    result = train(data, gen_cfg, args.steps, tc)
    out = Path(args.out)
    summary = {
        "variant": args.variant,
        "steps": args.steps,
        "samples": [s.sample_id for s in data],
        "initial_content": result.initial_content,
        "final_content": result.final_content,
        "relative_reduction": result.relative_reduction,
    }
    save_checkpoint(out, result.state, extra=summary)
    terms = list(result.records[0].terms) if result.records else []
    write_table_csv(["step", "loss_d", "loss_g_adv", "content", *terms],
                    [[r.step, r.loss_d, r.loss_g_adv, r.content, *(r.terms[t] for t in terms)]
                     for r in result.records], out / "losses.csv")
    write_json(summary, out / "summary.json")
    man.seeds["train"] = args.seed
    man.add_output("checkpoint", out, exclude=[out / MANIFEST_NAME])
    _say(f"{args.variant}: content loss {result.initial_content:.4f} -> {result.final_content:.4f} "
         f"({100 * result.relative_reduction:.1f}% lower) after {args.steps} steps")
    return out / MANIFEST_NAME


# ---------------------------------------------------------------------------
# gradcheck


def cmd_gradcheck(args, man: RunManifest) -> Path | None:
    from ..gazegan.gradcheck import run_suite

    if args.seeds < 1:
        raise ValidationError("--seeds must be >= 1")
    suite = run_suite(args.op, args.seeds, first_seed=args.seed)
    failed = []
    rows = []
    for op, reports in suite.items():
        worst = max(r.max_error for r in reports)
        bad = [s for s, r in enumerate(reports, start=args.seed) if not r.passed]
        failed += [f"{op}/{s}" for s in bad]
        tol = reports[0].tolerance
        print(f"{op:8s} seeds={len(reports)} max_error={worst:.3e} tol={tol:.0e} "
              f"skipped={sum(r.skipped for r in reports)} {'FAIL' if bad else 'PASS'}")
        rows += [(f"{s:04d}", op, "max_rel_error", r.max_error) for s, r in enumerate(reports, start=args.seed)]
    man.seeds["first_seed"] = args.seed
    if args.out:
        man.add_output("errors", write_long_csv(rows, args.out))
    if failed:
        raise GazeBenchError(f"gradient check failed for {', '.join(failed)}")
    return Path(args.out).with_name(Path(args.out).name + ".manifest.json") if args.out else None


# ---------------------------------------------------------------------------
# io-score


def _io_one(task, metric: str, cal, cfg) -> float:
    fix, others = task
    per_observer = fix.split_by_observer()
    return io_score(per_observer, metric, cal, others, cfg=cfg)


def cmd_io_score(args, man: RunManifest) -> Path:
    layout = ingest(args.dataset)
    metric = _metric_list(args.metric)[0]
    groups = list(layout.groups) if args.group == "all" else [g.strip() for g in args.group.split(",")]
    cal, cfg = _calibration(args), ShuffleConfig(seed=args.seed)
    rows = []
    for g in groups:
        fixs = layout.fixations(g)
        sids = sorted(fixs)
        tasks = [(fixs[s], [fixs[o] for o in sids if o != s]) for s in sids]
        scores = list(pmap(partial(_io_one, metric=metric, cal=cal, cfg=cfg), tasks, args.jobs))
        rows += [(s, g, metric, v) for s, v in zip(sids, scores)]
        _say(f"{g}: IO {metric} = {np.mean(scores):.4f} over {len(scores)} stimuli")
    out = write_long_csv(rows, args.out)
    man.add_input("dataset", args.dataset)
    man.add_output("report", out)
    return out.with_name(out.name + ".manifest.json")
