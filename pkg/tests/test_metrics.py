import math

import numpy as np
import pytest
from scipy.ndimage import maximum_filter
from hypothesis import given, settings
from hypothesis import strategies as st

from gazebench.core import DegenerateInputError, DensityMap, FixationSet, GazeBenchError, VisualAngleCalibration
from gazebench.metrics import (
    METRICS,
    MetricResult,
    ShuffleConfig,
    auc_borji,
    auc_judd,
    cc,
    info_gain,
    io_score,
    kl_div,
    nss,
    roc_auc,
    sauc,
    sim,
    smooth_fixations,
)

import oracles


def random_instance(rng, size=16, n_fix=5):
    sm = rng.random((size, size))
    flat = rng.choice(size * size, n_fix, replace=False)
    rows, cols = np.divmod(flat, size)
    fix = FixationSet("r", cols.astype(float), rows.astype(float), np.zeros(n_fix, int), (size, size))
    return sm, fix, rows, cols


def sum1(a):
    return a / a.sum()


# --- smoothing -----------------------------------------------------------------


def test_smoothing_single_fixation_is_symmetric_blob():
    fix = FixationSet.from_points("c", [(30, 20)], (61, 41))
    d = smooth_fixations(fix, VisualAngleCalibration(sigma_pixels=4)).values
    assert np.unravel_index(np.argmax(d), d.shape) == (20, 30)
    assert np.allclose(d, d[::-1, :]) and np.allclose(d, d[:, ::-1])
    assert d.sum() == pytest.approx(1.0, abs=1e-12)


def test_smoothing_two_fixations_two_peaks():
    fix = FixationSet.from_points("c", [(400, 300), (700, 300)], (1100, 600))
    d = smooth_fixations(fix).values
    # the 3-sigma kernel cut leaves small cliffs, so modes are maxima over a sigma-radius window
    modes = (d == maximum_filter(d, size=2 * 57 + 1)) & (d > 1e-6 * d.max())
    assert sorted(zip(*np.nonzero(modes))) == [(300, 400), (300, 700)]


def test_smoothing_rejects_empty():
    with pytest.raises(GazeBenchError):
        smooth_fixations(FixationSet("e", [], [], [], (4, 4)))


# --- distribution metrics ---------------------------------------------------------


def test_cc_hand_example():
    assert cc([[1, 2], [3, 4]], [[1, 2], [4, 3]]) == pytest.approx(0.8, abs=1e-15)


def test_cc_degenerate():
    with pytest.raises(DegenerateInputError):
        cc(np.ones((3, 3)), np.eye(3))
    with pytest.raises(DegenerateInputError):
        cc(np.full((16, 16), 0.4), np.eye(16))
    with pytest.raises(DegenerateInputError):
        nss(np.full((16, 16), 0.4), FixationSet.from_points("c", [(1, 1)], (16, 16)))


def test_sim_examples():
    assert sim([0.5, 0.5, 0, 0], [0.25, 0.25, 0.25, 0.25]) == 0.5
    assert sim([0.5, 0.5, 0, 0], [0, 0, 0.5, 0.5]) == 0.0


def test_kl_examples():
    p, q = np.array([0.9, 0.1]), np.array([0.5, 0.5])
    assert kl_div(p, q) != pytest.approx(kl_div(q, p), abs=1e-6)
    assert kl_div(p, p) <= 1e-5
    big = kl_div(np.array([1.0, 0.0]), np.array([0.0, 1.0]))
    assert big == pytest.approx(math.log(1 / 1e-7), rel=1e-6)


def test_nss_examples():
    fix = FixationSet.from_points("n", [(0, 0)], (2, 2))
    assert nss(fix.raster(), fix) == pytest.approx(0.75 / math.sqrt(0.1875), abs=1e-12)
    everywhere = FixationSet.from_points("n", [(x, y) for x in range(3) for y in range(3)], (3, 3))
    assert nss(np.random.default_rng(0).random((3, 3)), everywhere) == pytest.approx(0.0, abs=1e-12)


def test_metric_result_direction():
    assert not MetricResult("KL", 0.3).higher_is_better
    assert all(MetricResult(m, 0.0).higher_is_better for m in METRICS if m != "KL")
    with pytest.raises(GazeBenchError):
        MetricResult("EMD", 1.0)


# --- AUC family --------------------------------------------------------------------


def test_auc_examples():
    sm, fix, _, _ = random_instance(np.random.default_rng(0))
    assert auc_judd(fix.raster(), fix) == 1.0
    assert abs(auc_borji(np.ones((16, 16)), fix) - 0.5) <= 0.02


def test_roc_area_ties():
    assert roc_auc(np.array([1.0]), np.array([1.0])) == 0.5
    assert roc_auc(np.array([2.0, 1.0]), np.array([1.0, 0.0])) == 0.875


def test_auc_judd_matches_sweep_oracle():
    rng = np.random.default_rng(1)
    for _ in range(50):
        sm, fix, rows, cols = random_instance(rng)
        # coarse quantization creates ties between positives and negatives
        sm = np.round(sm * 8) / 8
        mask = np.zeros(sm.shape, bool)
        mask[rows, cols] = True
        assert abs(auc_judd(sm, fix) - oracles.roc_area_sweep(sm[mask], sm[~mask])) <= 1e-12


def test_distribution_metrics_match_formula_oracles():
    rng = np.random.default_rng(2)
    for _ in range(50):
        p, q = sum1(rng.random((16, 16))), sum1(rng.random((16, 16)) ** 3)
        sm, fix, rows, cols = random_instance(rng)
        assert abs(cc(p, q) - oracles.pearson(p, q)) <= 1e-12
        assert abs(sim(p, q) - oracles.intersection(p, q)) <= 1e-12
        assert abs(kl_div(p, q) - oracles.kl(p, q)) <= 1e-12
        assert abs(nss(sm, fix) - oracles.nss(sm, rows, cols)) <= 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["square", "exp", "affine"]))
def test_auc_invariant_under_monotone_maps(seed, kind):
    sm, fix, _, _ = random_instance(np.random.default_rng(seed))
    others = [random_instance(np.random.default_rng(seed + 1))[1]]
    g = {"square": lambda a: a**2, "exp": np.exp, "affine": lambda a: 3 * a + 1}[kind]
    cfg = ShuffleConfig(n_splits=5, seed=seed)
    assert auc_judd(g(sm), fix) == auc_judd(sm, fix)
    assert auc_borji(g(sm), fix, cfg) == auc_borji(sm, fix, cfg)
    assert sauc(g(sm), fix, others, cfg) == sauc(sm, fix, others, cfg)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 10), st.floats(-5, 5))
def test_cc_nss_affine_invariance(seed, a, b):
    rng = np.random.default_rng(seed)
    sm, fix, _, _ = random_instance(rng)
    other = rng.random((16, 16))
    assert cc(a * sm + b, other) == pytest.approx(cc(sm, other), abs=1e-10)
    assert nss(a * sm + b, fix) == pytest.approx(nss(sm, fix), abs=1e-9)


def test_sim_symmetric():
    rng = np.random.default_rng(3)
    p, q = sum1(rng.random((8, 8))), sum1(rng.random((8, 8)))
    assert sim(p, q) == sim(q, p)


def test_sauc_needs_other_fixations():
    sm, fix, _, _ = random_instance(np.random.default_rng(4))
    with pytest.raises(GazeBenchError):
        sauc(sm, fix, [])


def test_sauc_seeded():
    rng = np.random.default_rng(5)
    sm, fix, _, _ = random_instance(rng)
    others = [random_instance(rng)[1] for _ in range(3)]
    cfg = ShuffleConfig(seed=9)
    assert sauc(sm, fix, others, cfg) == sauc(sm, fix, others, cfg)


# --- information gain --------------------------------------------------------------


def test_info_gain_examples():
    sm, fix, rows, cols = random_instance(np.random.default_rng(6))
    base = np.full((16, 16), 1 / 256)
    assert info_gain(base, fix, base) == 0.0
    doubled = np.full((16, 16), 0.0)
    doubled[rows, cols] = 2 / 256
    rest = ~(doubled > 0)
    doubled[rest] = (1 - doubled.sum()) / rest.sum()
    assert info_gain(doubled, fix, base, eps=0.0) == pytest.approx(1.0, abs=1e-12)
    # the default regularizer shifts the ratio slightly below 2
    expected = math.log2((2 / 256 + 1e-7) / (1 / 256 + 1e-7))
    assert info_gain(doubled, fix, base) == pytest.approx(expected, abs=1e-12)


# --- inter-observer ------------------------------------------------------------------


def test_io_identical_observers_collapse_to_single():
    pts = [(5, 6), (12, 3), (9, 9)]
    a = FixationSet.from_points("s", [(x, y, 0) for x, y in pts], (16, 16))
    b = FixationSet.from_points("s", [(x, y, 1) for x, y in pts], (16, 16))
    cal = VisualAngleCalibration(sigma_pixels=2)
    assert io_score([a, b], "NSS", cal) == pytest.approx(nss(smooth_fixations(a, cal).values, a), abs=1e-12)


@pytest.mark.parametrize("metric", ["CC", "NSS"])
def test_io_dissent_lowers_score(metric):
    cal = VisualAngleCalibration(sigma_pixels=2)
    pts = [(5, 6), (6, 7), (5, 8)]
    same = [FixationSet.from_points("s", [(x, y, o) for x, y in pts], (24, 24)) for o in range(4)]
    dissent = same[:3] + [FixationSet.from_points("s", [(20, 20, 3), (19, 21, 3), (21, 18, 3)], (24, 24))]
    assert io_score(dissent, metric, cal) < io_score(same, metric, cal)


def test_io_needs_two_observers():
    with pytest.raises(GazeBenchError):
        io_score([FixationSet.from_points("s", [(1, 1)], (4, 4))], "NSS")


def test_density_map_metrics_accept_containers():
    p = DensityMap.normalized(np.random.default_rng(7).random((6, 6)))
    assert cc(p, p) == pytest.approx(1.0)
