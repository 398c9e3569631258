import numpy as np
import pytest

from config import SynthConfig, parse_run_config
from errors import ConfigError
from imaging.synth import Building, rasterize, render_cd_pair, synth_cd_pair, synth_scene, synth_scene_spec


def test_scene_shapes_and_ranges():
    img, mask = synth_scene(np.random.default_rng(0), SynthConfig())
    assert img.shape == (64, 64, 3)
    assert mask.shape == (64, 64)
    assert set(np.unique(mask)) <= {0, 1}
    assert mask.any()
    assert img.min() >= 0.0 and img.max() <= 1.0


def test_scenes_are_seeded():
    cfg = SynthConfig(size=32)
    a = synth_scene(np.random.default_rng([3, 1]), cfg)
    b = synth_scene(np.random.default_rng([3, 1]), cfg)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])


def test_mask_is_union_of_building_footprints():
    _, mask, spec = synth_scene_spec(np.random.default_rng(4), SynthConfig())
    expected = np.zeros_like(mask)
    for b in spec.buildings:
        expected[b.row : b.row + b.height, b.col : b.col + b.width] = 1
    np.testing.assert_array_equal(mask, expected)


def test_rasterize_draws_border_and_fill():
    building = Building(row=1, col=1, height=4, width=4, fill=(0.9, 0.9, 0.9), border=(0.4, 0.4, 0.4))
    img, mask = rasterize([building], np.zeros((6, 6, 3)))
    assert mask.sum() == 16
    np.testing.assert_array_equal(img[1, 1], [0.4, 0.4, 0.4])
    np.testing.assert_array_equal(img[2, 2], [0.9, 0.9, 0.9])
    np.testing.assert_array_equal(img[0, 0], [0.0, 0.0, 0.0])


def test_change_mask_is_xor_of_footprints():
    cfg = SynthConfig(size=32)
    keep = Building(row=2, col=2, height=6, width=6, fill=(1.0, 1.0, 1.0), border=(0.5, 0.5, 0.5))
    gone = Building(row=20, col=20, height=6, width=6, fill=(1.0, 1.0, 1.0), border=(0.5, 0.5, 0.5))
    new = Building(row=2, col=20, height=6, width=6, fill=(1.0, 1.0, 1.0), border=(0.5, 0.5, 0.5))
    pair = render_cd_pair(np.random.default_rng(0), cfg, np.full((32, 32, 3), 0.3), [keep, gone], [keep, new])
    assert pair.change_mask.sum() == 72
    assert not pair.change_mask[2:8, 2:8].any()
    assert pair.change_mask[20:26, 20:26].all()
    assert pair.change_mask[2:8, 20:26].all()


def test_cd_pair_images_in_range():
    pair = synth_cd_pair(np.random.default_rng(9), SynthConfig())
    for img in (pair.image_t1, pair.image_t2):
        assert img.shape == (64, 64, 3)
        assert img.min() >= 0.0 and img.max() <= 1.0
    assert set(np.unique(pair.change_mask)) <= {0, 1}


def test_size_must_be_multiple_of_16():
    with pytest.raises(ConfigError):
        parse_run_config("size = 48")
