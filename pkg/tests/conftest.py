import numpy as np
import pytest

from gazebench.core import ColorImage, FixationSet, gaussian_blur, write_fixations_csv
from gazebench.transforms import apply_transform, get_record


def smooth_image(rng, h, w, sigma=4.0):
    a = np.stack([gaussian_blur(rng.random((h, w)), sigma) for _ in range(3)], axis=2)
    a = (a - a.min()) / (np.ptp(a) + 1e-12)
    return ColorImage(0.1 + 0.8 * a)


def _mirror_points(xs, ys, w, h):
    return w - 1 - xs, ys


def make_dataset(root, n_stimuli=3, groups=("Reference", "Mirroring", "Noise1"), size=(40, 32),
                 observers=4, per_observer=6, seed=0):
    """Tiny dataset tree: observers look near one hot spot per stimulus.

    Mirroring fixations are mirrored, photometric groups keep the reference
    coordinates, so alignment can be checked exactly.
    """
    rng = np.random.default_rng(seed)
    w, h = size
    refs, spots = {}, {}
    for i in range(n_stimuli):
        sid = f"s{i:02d}"
        refs[sid] = smooth_image(rng, h, w)
        spots[sid] = rng.uniform([6, 6], [w - 7, h - 7])
    for g in groups:
        d = root / g
        d.mkdir(parents=True)
        sets = []
        for sid, img in refs.items():
            apply_transform(get_record(g), img, seed=7).save(d / f"{sid}.png")
            pts = rng.normal(spots[sid], 2.0, size=(observers * per_observer, 2))
            xs, ys = np.clip(pts[:, 0], 0, w - 1), np.clip(pts[:, 1], 0, h - 1)
            if g == "Mirroring":
                xs, ys = _mirror_points(xs, ys, w, h)
            obs = np.repeat(np.arange(observers), per_observer)
            sets.append(FixationSet(sid, xs, ys, obs, (w, h)))
        write_fixations_csv(d / "fixations.csv", sets)
    return refs


@pytest.fixture
def dataset(tmp_path):
    root = tmp_path / "data"
    make_dataset(root)
    return root
