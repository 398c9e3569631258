from pathlib import Path

import numpy as np
import pytest

from config import AugConfig, RunConfig, SynthConfig, parse_run_config
from imaging.manifest import build_manifest, write_manifest
from imaging.netpbm import write_pgm, write_ppm
from imaging.synth import synth_cd_pair, synth_scene

QUICK_CONFIG = """
# tiny network on 32x32 scenes so every stage runs in well under a second
preset = tiny
epochs = 1
batch_size = 2
num_points = 4
seed = 3
ft_epochs = 1
ft_batch_size = 2
size = 32
max_buildings = 3
min_side = 5
"""


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def identity_aug() -> AugConfig:
    return AugConfig(
        jitter_prob=0.0,
        blur_prob=0.0,
        crop_scale_min=1.0,
        crop_scale_max=1.0,
        flip_prob=0.0,
    )


@pytest.fixture
def quick_config() -> RunConfig:
    return parse_run_config(QUICK_CONFIG)


@pytest.fixture
def quick_config_file(tmp_path) -> Path:
    path = tmp_path / "quick.cfg"
    path.write_text(QUICK_CONFIG)
    return path


@pytest.fixture
def scene():
    return synth_scene(np.random.default_rng(7), SynthConfig())


@pytest.fixture
def scenes():
    cfg = SynthConfig()
    return [synth_scene(np.random.default_rng([11, i]), cfg) for i in range(4)]


def write_scene_dir(
    root: Path, count: int, size: int = 32, fractions=(0.75, 0.25, 0.0), cfg: SynthConfig | None = None
) -> Path:
    root.mkdir(parents=True, exist_ok=True)
    cfg = cfg or SynthConfig(size=size, max_buildings=3, min_side=5)
    for i in range(count):
        img, mask = synth_scene(np.random.default_rng([5, i]), cfg)
        write_ppm(img, root / f"scene_{i:05d}.ppm")
        write_pgm(mask, root / f"scene_{i:05d}.pgm")
    write_manifest(build_manifest(root, fractions, seed=0))
    return root


def write_cd_dir(
    root: Path, count: int, size: int = 32, fractions=(0.5, 0.25, 0.25), cfg: SynthConfig | None = None
) -> Path:
    root.mkdir(parents=True, exist_ok=True)
    cfg = cfg or SynthConfig(size=size, max_buildings=3, min_side=5)
    for i in range(count):
        pair = synth_cd_pair(np.random.default_rng([6, i]), cfg)
        write_ppm(pair.image_t1, root / f"cd_{i:05d}_t1.ppm")
        write_ppm(pair.image_t2, root / f"cd_{i:05d}_t2.ppm")
        write_pgm(pair.change_mask, root / f"cd_{i:05d}_change.pgm")
    write_manifest(build_manifest(root, fractions, seed=0))
    return root


@pytest.fixture
def scene_dir(tmp_path) -> Path:
    return write_scene_dir(tmp_path / "scenes", 4)


@pytest.fixture
def cd_dir(tmp_path) -> Path:
    return write_cd_dir(tmp_path / "cd", 8)
