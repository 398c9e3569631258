"""Semantic-aware dense objective: dissimilar loss plus the two symmetrized similarity losses."""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel

from autograd.tensor import (
    Tensor,
    add,
    concat,
    constant,
    cosine_similarity,
    gather,
    getitem,
    mean,
    reshape,
    scale,
    stop_gradient,
)
from config import TrainConfig
from errors import DataError, ShapeError
from pretext.network import TensorParams, encoder_forward, project_predict, stack_images
from pretext.sampling import BACKGROUND, FOREGROUND, PointPlan, downscale_mask, masked_pool
from pretext.views import ViewTriplet

logger = logging.getLogger(__name__)


class LossBreakdown(BaseModel):
    l_sd: float = 0.0
    l_s1: float = 0.0
    l_s2: float = 0.0
    total: float = 0.0

    @classmethod
    def of(cls, l_sd: float, l_s1: float, l_s2: float) -> "LossBreakdown":
        return cls(l_sd=l_sd, l_s1=l_s1, l_s2=l_s2, total=l_sd + l_s1 + l_s2)


@dataclass
class BatchLoss:
    total: Tensor
    breakdown: LossBreakdown
    per_sample: list[LossBreakdown]
    fg_bg_cosine: float = math.nan
    cross_view_cosine: float = math.nan
    counts: dict[str, int] = field(default_factory=dict)


def semantic_dissimilar_loss(x_bg: Tensor, x_fg: Tensor) -> Tensor:
    """mean_n D(x_bg[n], x_fg[n]) + 1, pairing fg and bg points by index."""
    if x_bg.shape != x_fg.shape:
        raise ShapeError(f"background {x_bg.shape} and foreground {x_fg.shape} point counts differ")
    return add(mean(cosine_similarity(x_bg, x_fg)), constant(1.0, x_bg.data.dtype))


def symmetrized_similarity(p_a: Tensor, z_b: Tensor, p_b: Tensor, z_a: Tensor) -> Tensor:
    """1 − ½(D(p_a, sg(z_b)) + D(p_b, sg(z_a))), averaged over points."""
    forward = mean(cosine_similarity(p_a, stop_gradient(z_b)))
    reverse = mean(cosine_similarity(p_b, stop_gradient(z_a)))
    return add(constant(1.0, p_a.data.dtype), scale(add(forward, reverse), -0.5))


class _Stack:
    """Collects per-(sample, class) point embeddings of one view for a single projector pass."""

    def __init__(self):
        self.chunks: list[Tensor] = []
        self.slots: dict[tuple[int, int], slice] = {}
        self._offset = 0

    def push(self, sample: int, k: int, x: Tensor) -> None:
        self.chunks.append(x)
        self.slots[(sample, k)] = slice(self._offset, self._offset + x.shape[0])
        self._offset += x.shape[0]

    @property
    def rows(self) -> int:
        return self._offset

    def project(self, p: TensorParams, use_bn: bool) -> tuple[dict, dict]:
        if not self.chunks:
            return {}, {}
        z, pred = project_predict(concat(self.chunks, axis=0), p, use_bn)
        zs = {key: getitem(z, s) for key, s in self.slots.items()}
        ps = {key: getitem(pred, s) for key, s in self.slots.items()}
        return zs, ps


def _embed(
    features: Tensor,
    sample: int,
    k: int,
    coords: np.ndarray | None,
    mask_view: np.ndarray,
    sampling: str,
    ds: int,
) -> Tensor:
    fmap = getitem(features, sample)
    if sampling == "masked_pool":
        return reshape(masked_pool(fmap, mask_view, k, ds), (1, -1))
    return gather(fmap, coords)


def _pooled_classes(triplet: ViewTriplet, classes: tuple[int, ...], ds: int) -> tuple[int, ...]:
    cells1, cells2 = downscale_mask(triplet.mask1, ds), downscale_mask(triplet.mask2, ds)
    return tuple(k for k in classes if (cells1 == k - 1).any() and (cells2 == k - 1).any())


def _mean_cosine(a: np.ndarray, b: np.ndarray) -> float:
    na = np.linalg.norm(a, axis=-1) + 1e-8
    nb = np.linalg.norm(b, axis=-1) + 1e-8
    return float(((a * b).sum(axis=-1) / (na * nb)).mean())


def _term_mean(values: list[Tensor], dtype) -> Tensor:
    if not values:
        return constant(0.0, dtype)
    acc = values[0]
    for v in values[1:]:
        acc = add(acc, v)
    return scale(acc, 1.0 / len(values))


def batch_loss(
    triplets: list[ViewTriplet],
    plans: list[PointPlan],
    params: TensorParams,
    train: TrainConfig | None = None,
    input_stats: tuple[np.ndarray, np.ndarray] | None = None,
    use_bn: bool = True,
    ds: int = 4,
) -> BatchLoss:
    """Loss of one mini-batch, each term averaged over the samples that can contribute to it.

    A sample whose plan lost a class (retry limit hit) drops out of L_sd,
    contributes L_s1 for the classes it kept, and contributes L_s2 only when
    the foreground survived.

    `fg_bg_cosine` is measured on encoder embeddings. `cross_view_cosine` is the
    alignment the similarity terms maximise: cos(p1, z2) and cos(p2, z1) at
    corresponding points, averaged.
    """
    train = train or TrainConfig()
    if len(triplets) != len(plans):
        raise ShapeError(f"{len(triplets)} triplets but {len(plans)} point plans")
    if not triplets:
        raise DataError("batch has no valid samples")
    sampling = train.sampling
    dtype = params[next(iter(params))].data.dtype

    def encode(images: list[np.ndarray]) -> Tensor:
        return encoder_forward(constant(stack_images(images, input_stats), dtype), params)

    x1 = encode([t.view1 for t in triplets])
    x2 = encode([t.view2 for t in triplets])
    x3 = encode([t.view3 for t in triplets]) if train.use_bs else None

    classes: list[tuple[int, ...]] = []
    for triplet, plan in zip(triplets, plans):
        present = plan.classes
        if sampling == "masked_pool":
            present = _pooled_classes(triplet, present, ds)
        classes.append(present)
    if not any(classes):
        raise DataError("batch has no valid samples")

    stacks = {1: _Stack(), 2: _Stack(), 3: _Stack()}
    embeds: dict[tuple[int, int, int], Tensor] = {}
    for i, (triplet, plan) in enumerate(zip(triplets, plans)):
        for k in classes[i]:
            e1 = _embed(x1, i, k, plan.view1.get(k), triplet.mask1, sampling, ds)
            e2 = _embed(x2, i, k, plan.view2.get(k), triplet.mask2, sampling, ds)
            embeds[(1, i, k)], embeds[(2, i, k)] = e1, e2
            stacks[1].push(i, k, e1)
            stacks[2].push(i, k, e2)
        if x3 is not None and FOREGROUND in classes[i]:
            e3 = _embed(x3, i, FOREGROUND, plan.view3, triplet.mask1, sampling, ds)
            stacks[3].push(i, FOREGROUND, e3)

    # batch norm needs two rows; a batch that cannot fill a stack goes without the terms built on it
    if stacks[1].rows >= 2 or not use_bn:
        z1, p1 = stacks[1].project(params, use_bn)
        z2, p2 = stacks[2].project(params, use_bn)
    else:
        logger.warning("single embedding row in views 1/2: batch goes without L_s1 and L_s2")
        z1 = p1 = z2 = p2 = {}
    if z1 and (stacks[3].rows >= 2 or not use_bn):
        z3, p3 = stacks[3].project(params, use_bn)
    else:
        if z1 and stacks[3].rows:
            logger.warning("single foreground row in view 3: batch goes without L_s2")
        z3 = p3 = {}

    sd_terms, s1_terms, s2_terms = [], [], []
    per_sample = []
    fg_bg, cross = [], []
    for i in range(len(triplets)):
        present = classes[i]
        l_sd = l_s1 = l_s2 = None
        if not present:
            per_sample.append(LossBreakdown())
            continue
        if BACKGROUND in present and FOREGROUND in present:
            per_view = [
                semantic_dissimilar_loss(embeds[(v, i, BACKGROUND)], embeds[(v, i, FOREGROUND)]) for v in (1, 2)
            ]
            fg_bg.extend(float(t.data) - 1.0 for t in per_view)
            if train.use_sd:
                l_sd = scale(add(per_view[0], per_view[1]), 0.5)
                sd_terms.append(l_sd)
        if z1:
            per_class = [symmetrized_similarity(p1[(i, k)], z2[(i, k)], p2[(i, k)], z1[(i, k)]) for k in present]
            l_s1 = _term_mean(per_class, dtype)
            s1_terms.append(l_s1)
            for k in present:
                key = (i, k)
                aligned = _mean_cosine(p1[key].data, z2[key].data) + _mean_cosine(p2[key].data, z1[key].data)
                cross.append(0.5 * aligned)
        if (i, FOREGROUND) in z3:
            key = (i, FOREGROUND)
            l_s2 = symmetrized_similarity(p1[key], z3[key], p3[key], z1[key])
            s2_terms.append(l_s2)
        per_sample.append(
            LossBreakdown.of(
                float(l_sd.data) if l_sd is not None else 0.0,
                float(l_s1.data) if l_s1 is not None else 0.0,
                float(l_s2.data) if l_s2 is not None else 0.0,
            )
        )

    l_sd_mean = _term_mean(sd_terms, dtype)
    l_s1_mean = _term_mean(s1_terms, dtype)
    l_s2_mean = _term_mean(s2_terms, dtype)
    total = add(add(l_sd_mean, l_s1_mean), l_s2_mean)
    breakdown = LossBreakdown.of(float(l_sd_mean.data), float(l_s1_mean.data), float(l_s2_mean.data))
    return BatchLoss(
        total=total,
        breakdown=breakdown,
        per_sample=per_sample,
        fg_bg_cosine=float(np.mean(fg_bg)) if fg_bg else math.nan,
        cross_view_cosine=float(np.mean(cross)) if cross else math.nan,
        counts={"sd": len(sd_terms), "s1": len(s1_terms), "s2": len(s2_terms)},
    )


def per_sample_loss(
    triplet: ViewTriplet,
    plan: PointPlan,
    params: TensorParams,
    train: TrainConfig | None = None,
    input_stats: tuple[np.ndarray, np.ndarray] | None = None,
    use_bn: bool = True,
) -> LossBreakdown:
    return batch_loss([triplet], [plan], params, train, input_stats, use_bn).breakdown
