"""Three-view generation: two augmented views plus a background-swapped third view."""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from config import AugConfig
from errors import DataError, ShapeError
from imaging.augment import (
    ColorAugParams,
    GeomAugRecord,
    apply_color_aug,
    apply_geom_image,
    apply_geom_mask,
    sample_color_aug,
    sample_geom_aug,
)
from imaging.compositing import alpha_blend, color_transfer, erode, gaussian_blur
from imaging.netpbm import write_pgm, write_ppm

logger = logging.getLogger(__name__)


@dataclass
class TwoViews:
    view1: np.ndarray
    view2: np.ndarray
    mask1: np.ndarray
    mask2: np.ndarray
    rec1: GeomAugRecord
    rec2: GeomAugRecord
    color1: ColorAugParams
    color2: ColorAugParams
    attempts: int = 1


@dataclass
class ViewTriplet:
    view1: np.ndarray
    view2: np.ndarray
    view3: np.ndarray
    mask1: np.ndarray
    mask2: np.ndarray
    rec1: GeomAugRecord
    rec2: GeomAugRecord


TwoViewFn = Callable[[np.ndarray, np.ndarray, np.random.Generator], TwoViews]


def sample_rng(batch_seed: int, index: int, stream: int = 0) -> np.random.Generator:
    """Independent generator for one sample of one batch."""
    return np.random.default_rng([batch_seed, index, stream])


def partner_index(i: int, batch: int) -> int:
    return batch - 1 - i


def generate_two_views(img: np.ndarray, mask: np.ndarray, rng: np.random.Generator, cfg: AugConfig) -> TwoViews:
    if img.shape[:2] != mask.shape:
        raise ShapeError(f"image {img.shape} and mask {mask.shape} differ in size")
    if not mask.any():
        raise DataError("mask has no foreground pixel")
    height, width = mask.shape
    color1 = sample_color_aug(rng, cfg)
    rec1 = sample_geom_aug(rng, cfg, height, width)
    color2 = sample_color_aug(rng, cfg)
    rec2 = sample_geom_aug(rng, cfg, height, width)
    return TwoViews(
        view1=apply_geom_image(apply_color_aug(img, color1), rec1),
        view2=apply_geom_image(apply_color_aug(img, color2), rec2),
        mask1=apply_geom_mask(mask, rec1),
        mask2=apply_geom_mask(mask, rec2),
        rec1=rec1,
        rec2=rec2,
        color1=color1,
        color2=color2,
    )


def common_background_mask(mask1: np.ndarray, partner_mask1: np.ndarray) -> np.ndarray:
    if mask1.shape != partner_mask1.shape:
        raise ShapeError(f"masks {mask1.shape} and {partner_mask1.shape} differ in size")
    return ((mask1 == 0) & (partner_mask1 == 0)).astype(np.uint8)


def blend_alpha(mask1: np.ndarray, partner_mask1: np.ndarray, cfg: AugConfig) -> np.ndarray:
    background = erode(common_background_mask(mask1, partner_mask1), cfg.erode_radius)
    return gaussian_blur(background.astype(np.float64), cfg.blend_sigma, cfg.blend_radius)


def swap_background(
    view1: np.ndarray,
    mask1: np.ndarray,
    partner_view1: np.ndarray,
    partner_mask1: np.ndarray,
    cfg: AugConfig,
) -> np.ndarray:
    """Paste the partner's color-matched background onto the common background of view 1.

    Erosion reaches further than the blend blur, so alpha is exactly 0 on
    every foreground pixel of `mask1` and those pixels keep view 1's values.
    """
    if view1.shape != partner_view1.shape:
        raise ShapeError(f"views {view1.shape} and {partner_view1.shape} differ in size")
    transferred = color_transfer(partner_view1, view1, eps=cfg.transfer_eps)
    return alpha_blend(view1, transferred, blend_alpha(mask1, partner_mask1, cfg))


def _map(fn, items, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(*item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda item: fn(*item), items))


def complete_triplets(pairs: list[TwoViews], cfg: AugConfig, workers: int = 1, swap: bool = True) -> list[ViewTriplet]:
    batch = len(pairs)

    def build(i: int, pair: TwoViews) -> ViewTriplet:
        partner = pairs[partner_index(i, batch)]
        view3 = swap_background(pair.view1, pair.mask1, partner.view1, partner.mask1, cfg) if swap else pair.view1
        return ViewTriplet(pair.view1, pair.view2, view3, pair.mask1, pair.mask2, pair.rec1, pair.rec2)

    return _map(build, list(enumerate(pairs)), workers)


def generate_views_batch(
    images: list[np.ndarray],
    masks: list[np.ndarray],
    batch_seed: int,
    cfg: AugConfig,
    two_view_fn: TwoViewFn | None = None,
    workers: int = 1,
    swap: bool = True,
) -> list[ViewTriplet]:
    """Views for a batch; sample i takes its third-view background from sample B-1-i.

    Runs as two barrier-separated phases (all two-view pairs, then all swaps),
    each sample drawing from its own `(batch_seed, i)` stream, so the output
    does not depend on `workers`.
    """
    if len(images) != len(masks) or not images:
        raise ShapeError(f"need equal, non-empty image/mask lists, got {len(images)} and {len(masks)}")
    two_view_fn = two_view_fn or (lambda img, mask, rng: generate_two_views(img, mask, rng, cfg))
    items = [(img, mask, sample_rng(batch_seed, i)) for i, (img, mask) in enumerate(zip(images, masks))]
    pairs = _map(two_view_fn, items, workers)
    return complete_triplets(pairs, cfg, workers, swap=swap)


def dump_triplets(triplets: list[ViewTriplet], out_dir: str | Path) -> None:
    out_dir = Path(out_dir)
    for i, t in enumerate(triplets):
        for name, view in (("view1", t.view1), ("view2", t.view2), ("view3", t.view3)):
            write_ppm(view, out_dir / f"sample{i:03d}_{name}.ppm")
        write_pgm(t.mask1, out_dir / f"sample{i:03d}_mask1.pgm")
        write_pgm(t.mask2, out_dir / f"sample{i:03d}_mask2.pgm")
    logger.info("dumped %d view triplets to %s", len(triplets), out_dir)
