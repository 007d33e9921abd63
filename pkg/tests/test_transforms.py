import io
import math

import numpy as np
import pytest
from PIL import Image

from gazebench.core import (
    ColorImage,
    DensityMap,
    GazeBenchError,
    apply_affine,
    fit_placement,
    gaussian_blur,
    place,
    scaled_placement,
)
from gazebench.transforms import (
    GROUP_IDS,
    align_to_reference,
    apply_transform,
    boundary_map,
    canny_edges,
    contrast_adjust,
    crop_band,
    crop_region,
    downscale,
    flip_vertical,
    forward_density,
    gaussian_noise,
    get_record,
    invert,
    jpeg_round_trip,
    mirror,
    motion_blur,
    motion_kernel,
    noise_field,
    output_frame,
    quantization_tables,
    rotate,
    shear,
    transform_catalog,
    warp_density,
)

from conftest import smooth_image
from oracles import loose_size


@pytest.fixture
def img():
    return smooth_image(np.random.default_rng(0), 48, 64)


def blob_density(h, w, cx, cy, sigma):
    yy, xx = np.mgrid[0:h, 0:w]
    return DensityMap.normalized(np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * sigma**2)))


# --- motion blur ---------------------------------------------------------------


def test_motion_length_one_is_identity(img):
    for angle in (0, 37, 90):
        assert motion_blur(img, 1, angle) is img


def test_motion_constant_image_unchanged():
    c = ColorImage(np.full((20, 20, 3), 0.3))
    assert np.allclose(motion_blur(c, 15, 0).data, 0.3, atol=1e-15)


def test_motion_impulse_gives_uniform_streak():
    a = np.zeros((31, 41, 3))
    a[15, 20] = 1.0
    out = motion_blur(ColorImage(a), 15, 0).data[:, :, 0]
    assert np.allclose(out[15, 13:28], 1 / 15, atol=1e-15)
    assert np.count_nonzero(out > 1e-15) == 15


def test_motion_kernel_vertical_and_normalized():
    k = motion_kernel(35, 90)
    assert k.shape == (35, 1)
    assert math.isclose(motion_kernel(15, 30).sum(), 1.0, abs_tol=1e-15)


# --- noise -------------------------------------------------------------------


def test_noise_zero_variance_is_identity(img):
    assert gaussian_noise(img, 0.0, seed=1) is img


def test_noise_variance_on_unclipped_pixels():
    gray = ColorImage(np.full((1000, 1000, 3), 0.5))
    out = gaussian_noise(gray, 0.1, seed=7).data[:, :, 0]
    field = noise_field(gray.data.shape, 0.1, 7)[:, :, 0]
    inside = (out > 0.0) & (out < 1.0)
    # unclipped pixels carry the raw draw (up to the rounding of 0.5 + n - 0.5)
    assert np.allclose((out - 0.5)[inside], field[inside], rtol=0, atol=1e-15)
    # variance is a property of the pre-clip draw; clipping truncates the tails
    assert abs(field.var() - 0.1) <= 0.005


def test_noise_is_deterministic(img):
    a = gaussian_noise(img, 0.2, seed=3).data
    b = gaussian_noise(img, 0.2, seed=3).data
    assert np.array_equal(a, b)
    assert not np.array_equal(a, gaussian_noise(img, 0.2, seed=4).data)


# --- JPEG --------------------------------------------------------------------


@pytest.mark.parametrize("quality", [1, 5, 25, 50, 75, 95, 100])
def test_quantization_tables_match_pillow(quality):
    probe = Image.fromarray((np.random.default_rng(0).random((16, 16, 3)) * 255).astype(np.uint8))
    buf = io.BytesIO()
    probe.save(buf, format="JPEG", quality=quality)
    buf.seek(0)
    with Image.open(buf) as im:
        ref = [np.array(im.quantization[i]).reshape(8, 8) for i in (0, 1)]
    luma, chroma = quantization_tables(quality)
    assert np.array_equal(luma, ref[0]) and np.array_equal(chroma, ref[1])


def test_jpeg_quality_100_constant_block():
    c = ColorImage.from_uint8(np.full((8, 8, 3), 133, np.uint8))
    assert np.abs(jpeg_round_trip(c, 100).data - c.data).max() <= 1 / 255 + 1e-12


def test_jpeg_gray_at_quality_5_stays_uniform():
    c = ColorImage.from_uint8(np.full((32, 32, 3), 128, np.uint8))
    out = jpeg_round_trip(c, 5).data
    assert np.abs(out - c.data).max() <= 2 / 255 + 1e-12


def test_jpeg_quality_0_equals_1(img):
    assert np.array_equal(jpeg_round_trip(img, 0).data, jpeg_round_trip(img, 1).data)


# --- contrast ------------------------------------------------------------------


def test_contrast_examples(img):
    assert np.array_equal(contrast_adjust(img, 0.0, 1.0).data, img.data)
    probe = ColorImage(np.array([[[0.5, 0.0, 1.0]]]))
    out = contrast_adjust(probe, 0.3, 0.7).data[0, 0]
    assert out[0] == pytest.approx(0.5, abs=1e-15) and out[1] == 0.3 and out[2] == pytest.approx(0.7, abs=1e-15)


# --- geometry ----------------------------------------------------------------


def test_mirror_and_invert_involutions(img):
    assert np.array_equal(mirror(mirror(img)).data, img.data)
    assert np.array_equal(invert(invert(img)).data, img.data)
    assert np.array_equal(invert(img).data, mirror(flip_vertical(img)).data)
    assert np.array_equal(rotate(img, -180).data, invert(img).data)


def test_shearing1_maps_point():
    rec = get_record("Shearing1")
    x, y = rec.geometry.apply(10.0, 4.0)
    assert (x, y) == (12.0, 4.0)


@pytest.mark.parametrize("group", ["Rotation1", "Rotation2", "Shearing1", "Shearing2", "Shearing3"])
def test_loose_sizes_match_corner_hull(img, group):
    rec = get_record(group)
    out = apply_transform(rec, img)
    assert (out.width, out.height) == loose_size(img.width, img.height, rec.geometry.m.tolist())


@pytest.mark.parametrize("group", ["Rotation1", "Rotation2", "Shearing1", "Shearing2", "Shearing3"])
def test_alignment_round_trip_mae(group):
    smooth = smooth_image(np.random.default_rng(5), 60, 80, sigma=6.0)
    rec = get_record(group)
    full, w, h = output_frame(rec, smooth.width, smooth.height)
    fwd = apply_transform(rec, smooth)
    back = apply_affine(fwd, full.inverse(), bbox=(smooth.width, smooth.height)).data
    assert np.abs(back[1:-1, 1:-1] - smooth.data[1:-1, 1:-1]).mean() <= 0.02


def test_singular_shear_rejected(img):
    with pytest.raises(GazeBenchError):
        shear(img, [[1, 1, 0], [1, 1, 0], [0, 0, 1]])


# --- crop and downscale -------------------------------------------------------


def test_crop_zero_band_identity(img):
    assert np.array_equal(crop_band(img, "left", (img.height, 0)).data, img.data)


def test_crop_regions_full_hd():
    x0, y0, x1, y1 = crop_region("left", (1080, 200), 1920, 1080)
    assert (1920 - (x1 - x0), 1080) == (1720, 1080)
    x0, y0, x1, y1 = crop_region("top", (200, 1920), 1920, 1080)
    assert (1080 - (y1 - y0)) == 880


def test_crop_preserves_untouched_pixels(img):
    out = crop_band(img, "left", (img.height, 10), mode="remove").data
    assert np.all(out[:, :10] == 0.5)
    assert np.array_equal(out[:, 10:], img.data[:, 10:])
    kept = crop_band(img, "top", (7, img.width), mode="keep").data
    assert np.array_equal(kept, img.data[7:])


def test_crop_band_must_fit(img):
    with pytest.raises(GazeBenchError):
        crop_band(img, "left", (img.height, img.width + 1))


def test_downscale_examples(img):
    assert np.array_equal(downscale(img, 1.0).data, img.data)
    pl = scaled_placement(1920, 1080, 0.5)
    assert (pl.content_w, pl.content_h, pl.offset_x, pl.offset_y) == (960, 540, 480, 270)
    pl = scaled_placement(1920, 1080, 0.548)
    assert (pl.content_w, pl.content_h) == (1052, 592)
    with pytest.raises(GazeBenchError):
        downscale(img, 0.0)


# --- canny ---------------------------------------------------------------------


def test_canny_constant_image_black():
    out = boundary_map(ColorImage(np.full((20, 20, 3), 0.4))).data
    assert not out.any()


def test_canny_step_edge_single_line():
    a = np.zeros((32, 32))
    a[:, 16:] = 1.0
    edges = canny_edges(a)
    cols = np.flatnonzero(edges.any(axis=0))
    assert cols.size == 1 and cols[0] in (15, 16)
    assert edges[4:-4, cols[0]].all()


def test_canny_output_binary(img):
    out = boundary_map(img).data
    assert set(np.unique(out)) <= {0.0, 1.0}


# --- catalog and alignment -------------------------------------------------------


def test_catalog_shape():
    cat = transform_catalog()
    assert len(cat) == 21
    assert [r.id for r in cat] == list(GROUP_IDS)


def test_every_group_runs_deterministically(img):
    for rec in transform_catalog():
        a = apply_transform(rec, img, seed=11).data
        b = apply_transform(rec, img, seed=11).data
        assert np.array_equal(a, b), rec.id


def test_align_reference_and_mirror_exact():
    dm = DensityMap.normalized(np.random.default_rng(2).random((12, 17)))
    assert np.array_equal(align_to_reference(dm, get_record("Reference")).values, dm.values)
    for g in ("Mirroring", "Inversion"):
        rec = get_record(g)
        assert np.array_equal(align_to_reference(forward_density(dm, rec), rec).values, dm.values)


@pytest.mark.parametrize("group", ["Rotation1", "Rotation2", "Shearing1", "Shearing2", "Shearing3", "DownScaling1"])
def test_alignment_preserves_mass(group):
    h, w = 90, 120
    ref = blob_density(h, w, 55, 42, 8.0)
    rec = get_record(group)
    shown = forward_density(ref, rec)
    full, ow, oh = output_frame(rec, w, h)
    raw_back = warp_density(shown.values, full.inverse(), w, h)
    # mass that lands inside the reference footprint, before renormalization
    assert abs(raw_back.sum() - 1.0) <= 0.01
    aligned = align_to_reference(shown, rec, (w, h))
    assert aligned.frame == "Reference"
    assert np.abs(aligned.values - ref.values).sum() <= 0.05


def test_align_rejects_in_place_groups():
    dm = DensityMap.normalized(np.ones((4, 4)))
    with pytest.raises(GazeBenchError):
        align_to_reference(dm, get_record("Noise1"))


def test_align_accepts_display_canvas_maps():
    h, w = 60, 80
    ref = blob_density(h, w, 40, 30, 5.0)
    rec = get_record("Rotation1")
    full, ow, oh = output_frame(rec, w, h)
    shown = forward_density(ref, rec)
    pl = fit_placement(ow, oh, w, h)
    on_canvas = DensityMap.normalized(place(shown.values, pl, 0.0))
    aligned = align_to_reference(on_canvas, rec, (w, h))
    yy, xx = np.mgrid[0:h, 0:w]
    cy = (aligned.values * yy).sum()
    cx = (aligned.values * xx).sum()
    assert abs(cx - 40) < 1.0 and abs(cy - 30) < 1.0


def test_blur_helper_keeps_blob_peak():
    a = np.zeros((21, 21))
    a[10, 10] = 1
    b = gaussian_blur(a, 2.0)
    assert np.unravel_index(np.argmax(b), b.shape) == (10, 10)
