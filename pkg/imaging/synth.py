"""Synthetic aerial scenes: rectangular buildings on a value-noise terrain."""
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, ConfigDict

from config import SynthConfig
from imaging.augment import resize_bilinear


class Building(BaseModel):
    model_config = ConfigDict(frozen=True)

    row: int
    col: int
    height: int
    width: int
    fill: tuple[float, float, float]
    border: tuple[float, float, float]


class SceneSpec(BaseModel):
    size: int
    base_color: tuple[float, float, float]
    buildings: list[Building]


@dataclass
class CDPair:
    image_t1: np.ndarray
    image_t2: np.ndarray
    change_mask: np.ndarray


def terrain(rng: np.random.Generator, cfg: SynthConfig) -> tuple[np.ndarray, tuple[float, float, float]]:
    grid = rng.random((cfg.noise_cells + 1, cfg.noise_cells + 1))
    noise = resize_bilinear(grid, cfg.size, cfg.size)
    base = rng.uniform(0.2, 0.6, size=3)
    field = base[None, None, :] * (0.6 + 0.8 * noise[..., None])
    return np.clip(field, 0.0, 1.0), tuple(float(c) for c in base)


def draw_building(rng: np.random.Generator, cfg: SynthConfig) -> Building:
    height = int(rng.integers(cfg.min_side, cfg.max_side + 1))
    width = int(rng.integers(cfg.min_side, cfg.max_side + 1))
    row = int(rng.integers(0, cfg.size - height + 1))
    col = int(rng.integers(0, cfg.size - width + 1))
    fill = rng.uniform(0.55, 1.0, size=3)
    return Building(
        row=row,
        col=col,
        height=height,
        width=width,
        fill=tuple(float(c) for c in fill),
        border=tuple(float(c) for c in fill * 0.45),
    )


def rasterize(buildings: list[Building], background: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    img = background.copy()
    size = img.shape[0]
    mask = np.zeros(img.shape[:2], dtype=np.uint8)
    for b in buildings:
        r0, c0 = max(b.row, 0), max(b.col, 0)
        r1, c1 = min(b.row + b.height, size), min(b.col + b.width, size)
        if r0 >= r1 or c0 >= c1:
            continue
        img[r0:r1, c0:c1] = b.border
        if r1 - r0 > 2 and c1 - c0 > 2:
            img[r0 + 1 : r1 - 1, c0 + 1 : c1 - 1] = b.fill
        mask[r0:r1, c0:c1] = 1
    return img, mask


def synth_scene(rng: np.random.Generator, cfg: SynthConfig) -> tuple[np.ndarray, np.ndarray]:
    img, mask, _ = synth_scene_spec(rng, cfg)
    return img, mask


def synth_scene_spec(rng: np.random.Generator, cfg: SynthConfig) -> tuple[np.ndarray, np.ndarray, SceneSpec]:
    background, base = terrain(rng, cfg)
    count = int(rng.integers(cfg.min_buildings, cfg.max_buildings + 1))
    buildings = [draw_building(rng, cfg) for _ in range(count)]
    img, mask = rasterize(buildings, background)
    return img, mask, SceneSpec(size=cfg.size, base_color=base, buildings=buildings)


def synth_cd_pair(rng: np.random.Generator, cfg: SynthConfig) -> CDPair:
    background, _ = terrain(rng, cfg)
    count = int(rng.integers(cfg.min_buildings, cfg.max_buildings + 1))
    before = [draw_building(rng, cfg) for _ in range(count)]
    after = [b for b in before if rng.random() >= cfg.remove_prob]
    after += [draw_building(rng, cfg) for _ in range(int(rng.integers(0, cfg.max_added + 1)))]
    return render_cd_pair(rng, cfg, background, before, after)


def render_cd_pair(
    rng: np.random.Generator,
    cfg: SynthConfig,
    background: np.ndarray,
    before: list[Building],
    after: list[Building],
) -> CDPair:
    img1, mask1 = rasterize(before, background)
    img2, mask2 = rasterize(after, background)
    gains = rng.uniform(1 - cfg.epoch_jitter, 1 + cfg.epoch_jitter, size=(2, 3))
    return CDPair(
        image_t1=np.clip(img1 * gains[0], 0.0, 1.0),
        image_t2=np.clip(img2 * gains[1], 0.0, 1.0),
        change_mask=(mask1 ^ mask2).astype(np.uint8),
    )
