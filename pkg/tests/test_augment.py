import numpy as np
import pytest

from config import AugConfig
from errors import GeometryError
from imaging.augment import (
    ColorAugParams,
    GeomAugRecord,
    apply_color_aug,
    apply_geom_image,
    apply_geom_mask,
    blur_radius,
    grayscale,
    hsv_to_rgb,
    nearest_index,
    resize_bilinear,
    rgb_to_hsv,
    sample_color_aug,
    sample_geom_aug,
)


@pytest.fixture
def image():
    return np.random.default_rng(0).random((16, 16, 3))


def test_identity_color_params_leave_image_unchanged(image):
    np.testing.assert_array_equal(apply_color_aug(image, ColorAugParams()), image)
    neutral = ColorAugParams(apply_jitter=True)
    np.testing.assert_array_equal(apply_color_aug(image, neutral), image)


def test_color_aug_output_stays_in_unit_range(image):
    rng = np.random.default_rng(1)
    cfg = AugConfig(jitter_prob=1.0, blur_prob=1.0)
    for _ in range(20):
        out = apply_color_aug(image, sample_color_aug(rng, cfg))
        assert out.shape == image.shape
        assert out.min() >= 0.0 and out.max() <= 1.0


def test_brightness_scales_then_clamps():
    img = np.full((2, 2, 3), 0.8)
    out = apply_color_aug(img, ColorAugParams(apply_jitter=True, brightness=1.5))
    np.testing.assert_array_equal(out, np.ones((2, 2, 3)))


def test_zero_saturation_gives_gray(image):
    out = apply_color_aug(image, ColorAugParams(apply_jitter=True, saturation=0.0))
    np.testing.assert_allclose(out, np.repeat(grayscale(image)[..., None], 3, axis=-1))


def test_hsv_round_trip(image):
    np.testing.assert_allclose(hsv_to_rgb(rgb_to_hsv(image)), image, atol=1e-10)


def test_hue_shift_of_full_turn_is_identity(image):
    hsv = rgb_to_hsv(image)
    hsv[..., 0] = (hsv[..., 0] + 1.0) % 1.0
    np.testing.assert_allclose(hsv_to_rgb(hsv), image, atol=1e-10)


def test_blur_radius_is_clamped():
    assert blur_radius(0.1) == 1
    assert blur_radius(1.0) == 3
    assert blur_radius(2.0) == 4


def test_color_draws_are_seeded():
    cfg = AugConfig()
    a = sample_color_aug(np.random.default_rng(5), cfg)
    b = sample_color_aug(np.random.default_rng(5), cfg)
    assert a == b


def test_geometry_draws_stay_in_bounds():
    rng = np.random.default_rng(2)
    cfg = AugConfig()
    for _ in range(1000):
        rec = sample_geom_aug(rng, cfg, 64, 64)
        rec.check_bounds(64, 64)
        assert rec.w * rec.h >= cfg.crop_scale_min * 64 * 64
        assert (rec.out_h, rec.out_w) == (64, 64)


def test_check_bounds_rejects_overhanging_crop():
    with pytest.raises(GeometryError):
        GeomAugRecord(u=40, v=0, w=32, h=32, out_h=64, out_w=64).check_bounds(64, 64)


def test_identity_record_leaves_image_unchanged(image):
    np.testing.assert_array_equal(apply_geom_image(image, GeomAugRecord.identity(16, 16)), image)


def test_flip_only_mask_matches_numpy_flip():
    mask = (np.random.default_rng(3).random((8, 8)) > 0.5).astype(np.uint8)
    rec = GeomAugRecord(u=0, v=0, w=8, h=8, out_h=8, out_w=8, hflip=True, vflip=True)
    np.testing.assert_array_equal(apply_geom_mask(mask, rec), mask[::-1, ::-1])


def test_crop_and_upscale_mask_by_two():
    mask = np.zeros((8, 8), dtype=np.uint8)
    mask[2, 3] = 1
    rec = GeomAugRecord(u=2, v=2, w=4, h=4, out_h=8, out_w=8)
    out = apply_geom_mask(mask, rec)
    expected = np.zeros((8, 8), dtype=np.uint8)
    expected[0:2, 2:4] = 1
    np.testing.assert_array_equal(out, expected)


def test_nearest_index_upsampling():
    np.testing.assert_array_equal(nearest_index(2, 4), [0, 0, 1, 1])


def test_resize_bilinear_keeps_constants():
    img = np.full((5, 7, 3), 0.25)
    np.testing.assert_allclose(resize_bilinear(img, 9, 4), np.full((9, 4, 3), 0.25), atol=1e-6)


def bilinear_oracle(img, out_h, out_w):
    def taps(in_size, out_size):
        src = np.clip((np.arange(out_size) + 0.5) * (in_size / out_size) - 0.5, 0.0, in_size - 1)
        lo = np.floor(src).astype(np.int64)
        return lo, np.minimum(lo + 1, in_size - 1), src - lo

    lo, hi, fr = taps(img.shape[0], out_h)
    rows = img[lo] * (1.0 - fr)[:, None, None] + img[hi] * fr[:, None, None]
    lo, hi, fc = taps(img.shape[1], out_w)
    return rows[:, lo] * (1.0 - fc)[None, :, None] + rows[:, hi] * fc[None, :, None]


@pytest.mark.parametrize("out_shape", [(16, 16), (13, 9), (4, 6)])
def test_resize_bilinear_matches_half_pixel_oracle(out_shape):
    img = np.random.default_rng(9).random((8, 8, 3))
    np.testing.assert_allclose(resize_bilinear(img, *out_shape), bilinear_oracle(img, *out_shape), atol=1e-6)


def test_resize_to_same_size_is_exact():
    img = np.random.default_rng(10).random((6, 5, 3))
    np.testing.assert_array_equal(resize_bilinear(img, 6, 5), img)


def test_geom_image_output_is_clipped(image):
    rec = sample_geom_aug(np.random.default_rng(4), AugConfig(), 16, 16)
    out = apply_geom_image(image, rec)
    assert out.shape == (16, 16, 3)
    assert out.min() >= 0.0 and out.max() <= 1.0
