import numpy as np
import pytest

from errors import ConfigError, DataError
from imaging.manifest import (
    build_manifest,
    load_cd_pairs,
    load_scenes,
    read_manifest,
    subsample,
    write_manifest,
)
from conftest import write_cd_dir, write_scene_dir


def test_ten_pairs_split_eight_two(tmp_path):
    root = write_scene_dir(tmp_path / "d", 10, fractions=(0.8, 0.2, 0.0))
    manifest = read_manifest(root)
    assert len(manifest.split("train")) == 8
    assert len(manifest.split("val")) == 2
    assert manifest.split("test") == []


def test_split_is_seeded(tmp_path):
    root = write_scene_dir(tmp_path / "d", 10)
    a = build_manifest(root, seed=4)
    b = build_manifest(root, seed=4)
    assert [r.image for r in a.split("train")] == [r.image for r in b.split("train")]


def test_manifest_file_round_trips(tmp_path):
    root = write_scene_dir(tmp_path / "d", 5)
    built = build_manifest(root, (0.6, 0.2, 0.2), seed=1)
    path = write_manifest(built)
    lines = path.read_text().splitlines()
    assert lines[0] == "# seed=1"
    assert len(lines) == 1 + 5
    assert all(line.count("\t") == 2 for line in lines[1:])
    restored = read_manifest(path)
    assert restored.records == built.records
    assert restored.seed == 1


def test_manifest_without_seed_line(tmp_path):
    root = write_scene_dir(tmp_path / "d", 2)
    built = build_manifest(root)
    built.seed = None
    path = write_manifest(built)
    assert not path.read_text().startswith("#")
    assert read_manifest(path).seed is None


def test_manifest_bad_seed_line(tmp_path):
    root = write_scene_dir(tmp_path / "d", 2)
    path = root / "manifest.tsv"
    path.write_text("# seed=abc\n" + path.read_text().split("\n", 1)[1])
    with pytest.raises(DataError, match="seed"):
        read_manifest(path)


def test_missing_mask_is_reported(tmp_path):
    root = write_scene_dir(tmp_path / "d", 3)
    (root / "scene_00001.pgm").unlink()
    with pytest.raises(DataError, match="scene_00001.pgm"):
        build_manifest(root)


def test_manifest_referencing_missing_file(tmp_path):
    root = write_scene_dir(tmp_path / "d", 3)
    (root / "scene_00002.ppm").unlink()
    with pytest.raises(DataError):
        read_manifest(root)


def test_bad_fractions_are_config_errors(tmp_path):
    root = write_scene_dir(tmp_path / "d", 3)
    with pytest.raises(ConfigError):
        build_manifest(root, (0.8, 0.4, 0.0))


def test_subsample_counts_and_nesting(tmp_path):
    root = write_scene_dir(tmp_path / "d", 10, fractions=(1.0, 0.0, 0.0))
    records = read_manifest(root).split("train")
    small = subsample(records, 0.2, seed=0)
    large = subsample(records, 0.5, seed=0)
    assert len(small) == 2
    assert len(large) == 5
    assert {r.image for r in small} <= {r.image for r in large}
    assert subsample(records, 1.0, seed=0) == records


@pytest.mark.parametrize("frac", [0.0, 1.5, -0.1])
def test_subsample_rejects_fraction(frac):
    with pytest.raises(ConfigError):
        subsample([], frac, seed=0)


def test_cd_records_resolve_second_epoch(tmp_path):
    root = write_cd_dir(tmp_path / "cd", 4)
    manifest = read_manifest(root)
    record = manifest.records[0]
    assert record.is_cd_pair
    assert record.image_t2.endswith("_t2.ppm")
    assert record.mask.endswith("_change.pgm")
    pairs = load_cd_pairs(manifest, manifest.records)
    assert len(pairs) == 4
    assert pairs[0].image_t1.shape == (32, 32, 3)
    assert set(np.unique(pairs[0].change_mask)) <= {0, 1}


def test_load_scenes_reads_masks_as_binary(scene_dir):
    manifest = read_manifest(scene_dir)
    scenes = load_scenes(manifest, "train")
    assert len(scenes) == 3
    img, mask = scenes[0]
    assert img.shape == (32, 32, 3)
    assert mask.dtype == np.uint8
    assert mask.max() == 1
