import math

import numpy as np
import pytest

from autograd.tensor import Tape
from config import SynthConfig, get_preset, parse_run_config
from conftest import QUICK_CONFIG, write_scene_dir
from errors import DataError
from imaging.manifest import read_manifest
from pretext.network import INPUT_STATS, init_pretrain_params
from pretext.objective import batch_loss
from pretext.sampling import CLASSES, FOREGROUND
from training.checkpoint import load_checkpoint
from training.pretrain import (
    CSV_HEADER,
    batch_seed_for,
    epoch_order,
    prepare_batch,
    pretrain,
    write_loss_log,
)


def test_quick_run_logs_every_step(quick_config, scene_dir, tmp_path):
    seen = []
    ckpt_path = tmp_path / "model.ckpt"
    result = pretrain(quick_config, read_manifest(scene_dir), ckpt_path, on_row=seen.append)

    # 3 train scenes in batches of 2
    assert [r["step"] for r in result.rows] == [0, 1]
    assert seen == result.rows
    assert result.rows[0]["lr"] == pytest.approx(quick_config.train.lr0)
    for row in result.rows:
        for key in ("l_sd", "l_s1", "l_s2"):
            assert 0.0 <= row[key] <= 2.0
        assert row["total"] == pytest.approx(row["l_sd"] + row["l_s1"] + row["l_s2"])

    assert [e.epoch for e in result.epochs] == [0, 1]
    assert math.isnan(result.epochs[0].mean_total)
    assert result.epochs[1].mean_total == pytest.approx(np.mean([r["total"] for r in result.rows]))

    saved = load_checkpoint(ckpt_path)
    assert saved.meta.kind == "pretrain"
    assert saved.meta.preset == "tiny"
    assert saved.meta.epoch == 1
    assert saved.meta.config_digest == quick_config.digest()
    assert all(name in saved.tensors for name in INPUT_STATS)
    for name, value in result.checkpoint.tensors.items():
        np.testing.assert_array_equal(saved.tensors[name], value.astype(np.float32))


def test_runs_are_reproducible_across_worker_counts(quick_config, scene_dir):
    manifest = read_manifest(scene_dir)
    a = pretrain(quick_config, manifest, workers=1)
    b = pretrain(quick_config, manifest, workers=3)
    assert a.rows == b.rows
    for name, value in a.checkpoint.tensors.items():
        np.testing.assert_array_equal(b.checkpoint.tensors[name], value)


def test_zero_epochs_saves_the_initial_model(scene_dir, tmp_path):
    config = parse_run_config(QUICK_CONFIG, {"epochs": 0})
    result = pretrain(config, read_manifest(scene_dir), tmp_path / "init.ckpt")
    assert result.rows == []
    assert load_checkpoint(tmp_path / "init.ckpt").meta.epoch == 0


def test_dump_views_writes_first_batch(quick_config, scene_dir, tmp_path):
    dump = tmp_path / "views"
    pretrain(quick_config, read_manifest(scene_dir), dump_dir=dump)
    names = sorted(p.name for p in dump.iterdir())
    assert len(names) == 2 * 5
    assert "sample000_view3.ppm" in names
    assert "sample001_mask2.pgm" in names


def test_loss_log_layout(quick_config, scene_dir, tmp_path):
    result = pretrain(quick_config, read_manifest(scene_dir))
    lines = write_loss_log(result.rows, tmp_path / "logs" / "loss.csv").read_text().splitlines()
    assert lines[0] == CSV_HEADER
    assert len(lines) == 1 + len(result.rows)
    fields = lines[1].split(",")
    assert fields[0] == "0"
    assert float(fields[-1]) == pytest.approx(result.rows[0]["total"])


def test_validation_only_manifest(quick_config, tmp_path):
    root = write_scene_dir(tmp_path / "val_only", 2, fractions=(0.0, 1.0, 0.0))
    with pytest.raises(DataError):
        pretrain(quick_config, read_manifest(root))


def test_batch_seeds_and_epoch_order():
    assert batch_seed_for(3, 0) == batch_seed_for(3, 0)
    assert len({batch_seed_for(3, s) for s in range(50)}) == 50
    order = epoch_order(3, 1, 10)
    assert sorted(order) == list(range(10))
    np.testing.assert_array_equal(order, epoch_order(3, 1, 10))


def test_prepare_batch_plans_both_classes(quick_config, scenes):
    batch = prepare_batch(scenes[:2], 17, quick_config)
    assert len(batch.triplets) == 2
    assert batch.degraded == 0
    assert all(plan.classes == CLASSES for plan in batch.plans)
    assert batch.retries >= 0


def test_foreground_only_scenes_degrade_after_retries(rng):
    config = parse_run_config("preset = tiny\nretry_limit = 2\nnum_points = 4")
    scenes = [(rng.random((32, 32, 3)), np.ones((32, 32), dtype=np.uint8)) for _ in range(2)]
    batch = prepare_batch(scenes, 5, config)
    assert batch.degraded == 2
    assert batch.retries == 2 * 2
    assert all(plan.classes == (FOREGROUND,) for plan in batch.plans)

    params = Tape().watch_all(init_pretrain_params(np.random.default_rng(0), get_preset("tiny")))
    loss = batch_loss(batch.triplets, batch.plans, params, config.train)
    assert loss.counts["sd"] == 0
    assert loss.breakdown.l_sd == 0.0


def test_lone_point_in_a_single_sample_batch(scene_dir):
    # 3 train scenes in batches of 2 leave one sample with one point per class
    result = pretrain(parse_run_config(QUICK_CONFIG, {"num_points": 1}), read_manifest(scene_dir))
    assert len(result.rows) == 2
    assert result.rows[1]["l_s2"] == 0.0
    assert all(np.isfinite(r["total"]) for r in result.rows)


@pytest.mark.slow
def test_desk_run_separates_classes_and_aligns_views(tmp_path):
    root = write_scene_dir(tmp_path / "scenes", 256, fractions=(1.0, 0.0, 0.0), cfg=SynthConfig(size=64))
    result = pretrain(parse_run_config("preset = desk\nepochs = 5"), read_manifest(root))
    init, first, last = result.epochs[0], result.epochs[1], result.epochs[-1]
    assert last.epoch == 5
    assert last.mean_total <= 0.8 * first.mean_total
    assert last.fg_bg_cosine < init.fg_bg_cosine
    assert last.cross_view_cosine > init.cross_view_cosine
