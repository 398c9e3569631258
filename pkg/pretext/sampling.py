"""Masked point sampling across views.

Points are drawn in original-image coordinates inside the overlap of the two
crop windows, class-balanced by the source mask, then carried into each view
and down to feature-map resolution.
"""
from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel, ConfigDict

from autograd.tensor import Tensor, gather, mean
from errors import ClassAbsent, EmptyRegion, GeometryError, PointOutsideCrop
from imaging.augment import GeomAugRecord

BACKGROUND, FOREGROUND = 1, 2
CLASSES = (BACKGROUND, FOREGROUND)


class BBox(BaseModel):
    model_config = ConfigDict(frozen=True)

    u: int
    v: int
    w: int
    h: int

    @property
    def area(self) -> int:
        return self.w * self.h


@dataclass
class PointSet:
    """Sampled (row, col) points in original-image space, keyed by class k."""

    points: dict[int, np.ndarray] = field(default_factory=dict)

    @property
    def classes(self) -> tuple[int, ...]:
        return tuple(sorted(self.points))


@dataclass
class PointPlan:
    """Feature-map coordinates for one sample: views 1/2 per class, view 3 foreground only."""

    view1: dict[int, np.ndarray]
    view2: dict[int, np.ndarray]
    view3: np.ndarray | None
    source: PointSet

    @property
    def classes(self) -> tuple[int, ...]:
        return tuple(sorted(self.view1))


def reverse_geom(rec: GeomAugRecord) -> BBox:
    # flips mirror the view but leave the source window in place
    return BBox(u=rec.u, v=rec.v, w=rec.w, h=rec.h)


def overlap(bb1: BBox, bb2: BBox) -> BBox | None:
    u0, v0 = max(bb1.u, bb2.u), max(bb1.v, bb2.v)
    u1, v1 = min(bb1.u + bb1.w, bb2.u + bb2.w), min(bb1.v + bb1.h, bb2.v + bb2.h)
    if u1 <= u0 or v1 <= v0:
        return None
    return BBox(u=u0, v=v0, w=u1 - u0, h=v1 - v0)


def _window(mask: np.ndarray, bb: BBox) -> np.ndarray:
    if bb.u < 0 or bb.v < 0 or bb.u + bb.w > mask.shape[1] or bb.v + bb.h > mask.shape[0]:
        raise GeometryError(f"box {bb} lies outside a {mask.shape} mask")
    return mask[bb.v : bb.v + bb.h, bb.u : bb.u + bb.w]


def classes_present(mask: np.ndarray, bb: BBox) -> tuple[int, ...]:
    window = _window(mask, bb)
    return tuple(k for k in CLASSES if np.any(window == k - 1))


def sample_points(
    mask: np.ndarray,
    bb: BBox,
    n: int,
    rng: np.random.Generator,
    classes: tuple[int, ...] = CLASSES,
) -> PointSet:
    """Draw `n` points with replacement per class from the pixels of `bb` carrying that class."""
    if n < 1:
        raise ValueError("need at least one point per class")
    if bb.area == 0:
        raise GeometryError("cannot sample in an empty box")
    window = _window(mask, bb)
    points = {}
    for k in classes:
        candidates = np.argwhere(window == k - 1)
        if len(candidates) == 0:
            raise ClassAbsent(k)
        picked = candidates[rng.integers(0, len(candidates), size=n)]
        points[k] = picked + np.array([bb.v, bb.u])
    return PointSet(points)


def map_points(coords: np.ndarray, rec: GeomAugRecord) -> np.ndarray:
    """Carry original-image (row, col) points into the view produced by `rec`."""
    coords = np.asarray(coords, dtype=np.int64).reshape(-1, 2)
    rows, cols = coords[:, 0], coords[:, 1]
    inside = (rows >= rec.v) & (rows < rec.v + rec.h) & (cols >= rec.u) & (cols < rec.u + rec.w)
    if not inside.all():
        raise PointOutsideCrop(f"{int((~inside).sum())} point(s) fall outside crop ({rec.u},{rec.v},{rec.w},{rec.h})")
    # floor((p - origin) * out / crop) per axis
    out_r = np.minimum((rows - rec.v) * rec.out_h // rec.h, rec.out_h - 1)
    out_c = np.minimum((cols - rec.u) * rec.out_w // rec.w, rec.out_w - 1)
    if rec.vflip:
        out_r = rec.out_h - 1 - out_r
    if rec.hflip:
        out_c = rec.out_w - 1 - out_c
    return np.stack([out_r, out_c], axis=1)


def downscale_points(coords: np.ndarray, ds: int, shape: tuple[int, int] | None = None) -> np.ndarray:
    if ds < 1:
        raise ValueError("ds must be >= 1")
    scaled = np.asarray(coords, dtype=np.int64) // ds
    if shape is not None:
        scaled = np.minimum(scaled, np.array(shape) - 1)
    return scaled


def downscale_mask(mask: np.ndarray, ds: int) -> np.ndarray:
    """Majority vote per ds×ds cell; ties go to background."""
    height, width = mask.shape
    cells = mask[: height - height % ds, : width - width % ds].astype(np.int64)
    counts = cells.reshape(height // ds, ds, width // ds, ds).sum(axis=(1, 3))
    return (2 * counts > ds * ds).astype(np.uint8)


def masked_pool(x: Tensor, mask_view: np.ndarray, class_k: int, ds: int) -> Tensor:
    """Mean feature over the cells whose downscaled mask carries class `class_k`."""
    cells = np.argwhere(downscale_mask(mask_view, ds) == class_k - 1)
    if len(cells) == 0:
        raise EmptyRegion(f"class {class_k} covers no feature-map cell")
    return mean(gather(x, cells), axis=0)


def plan_points(
    rec1: GeomAugRecord,
    rec2: GeomAugRecord,
    mask: np.ndarray,
    n: int,
    ds: int,
    rng: np.random.Generator,
    classes: tuple[int, ...] = CLASSES,
) -> PointPlan:
    """Sample in the crop overlap and map the points to feature-map cells of each view.

    View 3 shares view 1's geometry, so its points are view 1's foreground points.
    """
    bb = overlap(reverse_geom(rec1), reverse_geom(rec2))
    if bb is None:
        raise GeometryError("the two views do not overlap")
    source = sample_points(mask, bb, n, rng, classes)
    shape1 = (rec1.out_h // ds, rec1.out_w // ds)
    shape2 = (rec2.out_h // ds, rec2.out_w // ds)
    view1 = {k: downscale_points(map_points(p, rec1), ds, shape1) for k, p in source.points.items()}
    view2 = {k: downscale_points(map_points(p, rec2), ds, shape2) for k, p in source.points.items()}
    return PointPlan(view1=view1, view2=view2, view3=view1.get(FOREGROUND), source=source)
