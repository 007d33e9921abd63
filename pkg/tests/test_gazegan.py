import math

import numpy as np
import pytest

from gazebench.core import DegenerateInputError, FixationSet, GazeBenchError
from gazebench.gazegan import (
    Adam,
    CscConfig,
    DiscriminatorConfig,
    GanState,
    GeneratorConfig,
    HistogramSpec,
    LossWeights,
    Tensor,
    TrainConfig,
    acs_loss,
    adversarial_loss,
    content_loss,
    conv2d,
    conv_transpose2d,
    csc_forward,
    discriminator_forward,
    generator_forward,
    generator_outputs,
    hist_estimate,
    leaky_relu,
    load_checkpoint,
    minmax_normalize,
    run_suite,
    save_checkpoint,
    spatial_softmax,
    synthetic_set,
    train,
    train_step,
)
from gazebench.gazegan.autograd import parameter, total
from gazebench.gazegan.histogram import hist_backward
from gazebench.gazegan.networks import init_discriminator, init_generator, init_params
from gazebench.metrics import nss

import oracles


# --- autograd primitives ------------------------------------------------------------


@pytest.mark.parametrize("seed", range(6))
def test_conv2d_matches_loop_oracle(seed):
    rng = np.random.default_rng(seed)
    k, stride, pad = rng.choice([1, 3, 4]), int(rng.integers(1, 3)), int(rng.integers(0, 3))
    x = rng.normal(size=(2, int(rng.integers(1, 4)), int(rng.integers(k, 11)), int(rng.integers(k, 11))))
    w = rng.normal(size=(int(rng.integers(1, 4)), x.shape[1], k, k))
    b = rng.normal(size=w.shape[0])
    out = conv2d(Tensor(x), Tensor(w), Tensor(b), stride, pad).data
    ref = oracles.conv2d_loop(x, w, b, stride, pad)
    assert out.shape == ref.shape
    assert out.shape[2] == (x.shape[2] + 2 * pad - k) // stride + 1
    assert np.allclose(out, ref, rtol=0, atol=1e-12)


@pytest.mark.parametrize("k,stride,pad,opad", [(4, 2, 1, 0), (3, 2, 1, 1), (3, 1, 1, 0), (2, 2, 0, 0)])
def test_conv_transpose_matches_scatter_oracle(k, stride, pad, opad):
    rng = np.random.default_rng(k + stride)
    x = rng.normal(size=(2, 3, 5, 4))
    w = rng.normal(size=(3, 2, k, k))
    b = rng.normal(size=2)
    out = conv_transpose2d(Tensor(x), Tensor(w), Tensor(b), stride, pad, opad).data
    assert np.allclose(out, oracles.conv_transpose2d_loop(x, w, b, stride, pad, opad), rtol=0, atol=1e-12)


def test_conv_gradients_match_central_differences():
    rng = np.random.default_rng(0)
    x0 = rng.normal(size=(1, 2, 5, 5))
    w0 = rng.normal(size=(3, 2, 3, 3))
    wt0 = rng.normal(size=(3, 2, 3, 3))
    probe = rng.normal(size=(1, 2, 6, 6))

    def loss(x, w, wt):
        y = conv2d(x, w, None, stride=2, padding=1)
        z = conv_transpose2d(y, wt, None, stride=2, padding=1, output_padding=1)
        return total(Tensor(probe) * z)

    xs, ws, wts = parameter(x0), parameter(w0), parameter(wt0)
    loss(xs, ws, wts).backward()
    fx = lambda a: float(loss(Tensor(a), Tensor(w0), Tensor(wt0)).data)
    fw = lambda a: float(loss(Tensor(x0), Tensor(a), Tensor(wt0)).data)
    ft = lambda a: float(loss(Tensor(x0), Tensor(w0), Tensor(a)).data)
    # the loss is bilinear in each argument, so central differences are exact up to round-off
    assert np.allclose(xs.grad, oracles.central_difference(fx, x0), atol=1e-7)
    assert np.allclose(ws.grad, oracles.central_difference(fw, w0), atol=1e-7)
    assert np.allclose(wts.grad, oracles.central_difference(ft, wt0), atol=1e-7)


def test_identity_1x1_conv():
    x = np.random.default_rng(1).normal(size=(2, 3, 4, 5))
    w = np.eye(3).reshape(3, 3, 1, 1)
    assert np.array_equal(conv2d(Tensor(x), Tensor(w), Tensor(np.zeros(3))).data, x)


def test_leaky_relu_slope():
    out = leaky_relu(Tensor(np.array([-1.0, 2.0]))).data
    assert out.tolist() == [-0.2, 2.0]


def test_conv_shape_mismatch_raises():
    with pytest.raises(GazeBenchError):
        conv2d(Tensor(np.zeros((1, 2, 4, 4))), Tensor(np.zeros((1, 3, 3, 3))))


# --- CSC ----------------------------------------------------------------------------


@pytest.fixture
def csc_setup():
    cfg = CscConfig(surround_layer=2, surround_channels=3, center_channels=4, unify_channels=5)
    params = init_params({f"{k}": v for k, v in cfg.param_shapes().items()}, seed=3, std=0.5)
    rng = np.random.default_rng(3)
    f_s = Tensor(rng.normal(size=(2, 3, 4, 4)))
    f_c = Tensor(rng.normal(size=(2, 4, 8, 8)))
    return cfg, params, f_s, f_c


def test_csc_zero_inputs_zero_output(csc_setup):
    cfg, params, f_s, f_c = csc_setup
    zeroed = {k: Tensor(np.zeros(p.shape)) if k.endswith(".b") else p for k, p in params.items()}
    out = csc_forward(Tensor(np.zeros(f_s.shape)), Tensor(np.zeros(f_c.shape)), cfg, zeroed).data
    assert out.shape == (2, 5, 8, 8) and not out.any()


def test_csc_attention_is_distribution(csc_setup):
    cfg, params, f_s, f_c = csc_setup
    assert cfg.center_layer == 6
    _, att = csc_forward(f_s, f_c, cfg, params, return_attention=True)
    assert np.allclose(att.data.sum(axis=(2, 3)), 1.0, rtol=0, atol=1e-9)
    assert att.data.min() > 0


def test_sharper_logits_raise_max_attention():
    logits = np.random.default_rng(5).normal(size=(1, 1, 6, 6))
    base = spatial_softmax(Tensor(logits)).data.max()
    assert spatial_softmax(Tensor(2 * logits)).data.max() > base


def test_csc_rejects_mismatched_scales(csc_setup):
    cfg, params, f_s, _ = csc_setup
    with pytest.raises(GazeBenchError):
        csc_forward(f_s, Tensor(np.zeros((2, 4, 6, 6))), cfg, params)
    with pytest.raises(GazeBenchError):
        CscConfig(5, 1, 1, 1)


# --- generator and discriminator --------------------------------------------------------


@pytest.mark.parametrize("variant", ["v1", "v2", "v3", "v4"])
def test_generator_shape_and_range(variant):
    cfg = GeneratorConfig.variant(variant)
    img = Tensor(np.random.default_rng(0).random((2, 3, 64, 64)))
    out = generator_forward(img, cfg, init_generator(cfg, 0)).data
    assert out.shape == (2, 1, 64, 64)
    assert out.min() > 0 and out.max() < 1


def test_generator_zero_weights_half():
    cfg = GeneratorConfig.variant("v4")
    params = {k: Tensor(np.zeros(p.shape)) for k, p in init_generator(cfg).items()}
    maps = generator_outputs(Tensor(np.random.default_rng(1).random((1, 3, 64, 64))), cfg, params)
    assert [m.shape for m in maps] == [(1, 1, 64, 64), (1, 1, 32, 32)]
    assert all(np.all(m.data == 0.5) for m in maps)


def test_generator_full_scale_indexing():
    cfg = GeneratorConfig.full_scale(base_channels=2, max_channels=4, local_global=False)
    shapes = init_generator(cfg)
    # CSC (i, i + 4) for i = 1..4 at full depth
    assert sorted({k.split(".")[1] for k in shapes if ".csc" in k}) == ["csc1", "csc2", "csc3", "csc4"]
    with pytest.raises(GazeBenchError):
        generator_forward(Tensor(np.zeros((1, 3, 64, 64))), cfg, shapes)


def test_discriminator_batch_and_condition():
    cfg = DiscriminatorConfig()
    params = {k.split(".", 1)[1]: v for k, v in init_discriminator(cfg, 2).items()}
    rng = np.random.default_rng(2)
    img = Tensor(rng.random((3, 3, 64, 64)))
    smap = Tensor(rng.random((3, 1, 64, 64)))
    out = discriminator_forward(img, smap, cfg, params).data
    assert out.ndim == 4 and out.shape[2] > 1 and 0 < out.min() and out.max() < 1
    perm = [2, 0, 1]
    permuted = discriminator_forward(Tensor(img.data[perm]), Tensor(smap.data[perm]), cfg, params).data
    assert np.array_equal(permuted, out[perm])
    other = discriminator_forward(Tensor(rng.random((3, 3, 64, 64))), smap, cfg, params).data
    assert not np.allclose(other, out)
    with pytest.raises(GazeBenchError):
        discriminator_forward(img, Tensor(np.zeros((3, 1, 32, 32))), cfg, params)


# --- histogram and ACS -----------------------------------------------------------------


def test_histogram_examples():
    p = hist_estimate([0, 0, 255, 255])
    assert p[0] == 0.5 and p[255] == 0.5 and p.sum() == 1.0
    p = hist_estimate([127.5])
    assert p[127] == pytest.approx(0.5, abs=1e-12) and p[128] == pytest.approx(0.5, abs=1e-12)


def test_histogram_partition_of_unity_and_oracle():
    rng = np.random.default_rng(0)
    for n in (1, 7, 255):
        lv = rng.uniform(0, 255, 500)
        lv[:5] = [0.0, 255.0, 127.5, 51.0, 254.999]
        p = hist_estimate(lv, HistogramSpec(n=n))
        assert abs(p.sum() - 1.0) <= 1e-12
        assert np.allclose(p, oracles.soft_histogram(lv, n), rtol=0, atol=1e-12)
    with pytest.raises(GazeBenchError):
        hist_estimate([256.0])


def test_histogram_backward_matches_differences_off_kinks():
    rng = np.random.default_rng(1)
    lv = rng.uniform(1, 254, 40)
    gp = rng.normal(size=256)
    analytic = hist_backward(lv, gp)
    numeric = oracles.central_difference(lambda v: float(gp @ hist_estimate(v)), lv, h=1e-6)
    assert np.allclose(analytic, numeric, rtol=0, atol=1e-8)


def test_minmax_examples():
    assert np.allclose(minmax_normalize([0.2, 0.5, 0.8]), [0.0, 0.5, 1.0], rtol=0, atol=1e-15)
    assert minmax_normalize([0.0, 3.0, 0.0]).tolist() == [0.0, 1.0, 0.0]
    with pytest.raises(DegenerateInputError):
        minmax_normalize([1.0, 1.0])


def test_acs_examples():
    x = np.random.default_rng(2).random(10)
    assert acs_loss(x, x)[0] == 0.0
    e0, e1 = np.eye(2)
    assert acs_loss(e0, e1)[0] == pytest.approx(4.0, abs=1e-7)
    y = np.random.default_rng(3).random(10)
    assert acs_loss(x, y)[0] == pytest.approx(acs_loss(y, x)[0], abs=1e-15)


# --- losses -----------------------------------------------------------------------------------


def fixed_point_case():
    yy, xx = np.mgrid[0:16, 0:16]
    gt = np.exp(-((xx - 7) ** 2 + (yy - 9) ** 2) / 12.0)
    fix = FixationSet.from_points("s", [(7, 9), (8, 9), (6, 8)], (16, 16))
    return gt, fix


def test_content_loss_fixed_point():
    gt, fix = fixed_point_case()
    w = LossWeights()
    value, _, terms = content_loss(gt, gt, fix, w, return_terms=True)
    assert terms["L1"] == 0.0 and terms["ACS"] == 0.0
    # tail pixels far below eps keep KL a few 1e-5 below zero
    assert abs(terms["KL"]) <= 1e-4
    assert terms["CC"] == pytest.approx(1.0, abs=1e-12)
    assert terms["NSS"] == pytest.approx(nss(gt, fix), abs=1e-12) and terms["NSS"] > 0
    assert value == pytest.approx(w.w3 + w.w4 * nss(gt, fix) + w.w2 * terms["KL"], abs=1e-12)


def test_content_loss_cc_nss_shift_invariant():
    gt, fix = fixed_point_case()
    sm = np.random.default_rng(4).uniform(0.1, 0.6, gt.shape)
    _, _, a = content_loss(sm, gt, fix, return_terms=True)
    _, _, b = content_loss(sm + 0.3, gt, fix, return_terms=True)
    assert a["CC"] == pytest.approx(b["CC"], abs=1e-12) and a["NSS"] == pytest.approx(b["NSS"], abs=1e-12)


def test_content_loss_constant_map_rejected():
    gt, fix = fixed_point_case()
    with pytest.raises(DegenerateInputError):
        content_loss(np.full(gt.shape, 0.4), gt, fix)


def test_adversarial_examples():
    half = np.full((1, 1, 4, 4), 0.5)
    loss_d, _ = adversarial_loss(half, half)
    assert loss_d == pytest.approx(2 * math.log(2), abs=1e-15)
    assert adversarial_loss(np.ones((2, 2)), np.zeros((2, 2)))[0] < 1e-6
    gs = [adversarial_loss(half, np.full((4,), v))[1] for v in (0.2, 0.4, 0.6, 0.8)]
    assert all(a > b for a, b in zip(gs, gs[1:]))


def test_gradient_suite_small():
    reports = run_suite("all", seeds=3)
    for op, reps in reports.items():
        assert all(r.passed for r in reps), (op, [r.max_error for r in reps])


# --- training ---------------------------------------------------------------------------------


@pytest.fixture(scope="module")
def toy():
    return synthetic_set(3, 64, seed=0)


def snapshot(state):
    return {k: p.data.copy() for k, p in {**state.gen, **state.disc}.items()}


def test_zero_learning_rate_keeps_parameters(toy):
    state = GanState.create(GeneratorConfig.variant("v4"), train_cfg=TrainConfig(lr=0.0))
    before = snapshot(state)
    train_step(toy[:1], state)
    after = snapshot(state)
    assert all(np.array_equal(before[k], after[k]) for k in before)


def test_training_is_deterministic(toy):
    a = train(toy, GeneratorConfig.variant("v4"), 3)
    b = train(toy, GeneratorConfig.variant("v4"), 3)
    assert [(r.loss_d, r.loss_g_adv, r.content) for r in a.records] == \
           [(r.loss_d, r.loss_g_adv, r.content) for r in b.records]


def test_initialization_statistics():
    cfg = GeneratorConfig.variant("v4")
    weights = np.concatenate([p.data.ravel() for k, p in init_generator(cfg, 0).items() if k.endswith(".w")])
    assert abs(weights.std() - 0.02) < 0.001 and abs(weights.mean()) < 0.001


def test_adam_first_step_moves_by_lr():
    p = parameter(np.array([1.0, -2.0]))
    opt = Adam({"p": p}, lr=0.1)
    p.grad = np.array([3.0, -0.5])
    opt.step()
    # bias-corrected first step is lr * sign(g) up to eps
    assert np.allclose(p.data, [0.9, -1.9], atol=1e-8)


def test_checkpoint_round_trip(tmp_path, toy):
    state = train(toy, GeneratorConfig.variant("v4"), 1).state
    save_checkpoint(tmp_path / "ck", state)
    loaded = load_checkpoint(tmp_path / "ck")
    assert loaded.step == state.step == 1
    assert all(np.array_equal(a, b) for a, b in zip(snapshot(state).values(), snapshot(loaded).values()))
    img = Tensor(toy[0].image[None])
    assert np.array_equal(generator_forward(img, loaded.gen_cfg, loaded.gen).data,
                          generator_forward(img, state.gen_cfg, state.gen).data)


def test_checkpoint_missing_dir_raises(tmp_path):
    with pytest.raises(GazeBenchError):
        load_checkpoint(tmp_path / "nope")
