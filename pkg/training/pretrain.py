"""Pre-training loop: view generation with retries, masked sampling, loss, momentum SGD."""
import logging
import math
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from pydantic import BaseModel

from autograd.tensor import Tape
from config import RunConfig, get_preset
from errors import DataError
from imaging.manifest import DatasetManifest, load_scenes
from pretext.network import INPUT_STATS, Params, channel_stats, init_pretrain_params
from pretext.objective import BatchLoss, batch_loss
from pretext.sampling import PointPlan, PointSet, classes_present, overlap, plan_points, reverse_geom
from pretext.views import TwoViews, ViewTriplet, dump_triplets, generate_two_views, generate_views_batch, sample_rng
from training.checkpoint import Checkpoint, CheckpointMeta, save_checkpoint
from training.optim import init_velocity, poly_lr, sgd_step

logger = logging.getLogger(__name__)

CSV_HEADER = "step,lr,l_sd,l_s1,l_s2,total"
PLAN_STREAM = 1
MONITOR_STREAM = 2**31 - 1


class EpochStats(BaseModel):
    epoch: int
    mean_total: float = math.nan
    mean_l_sd: float = math.nan
    mean_l_s1: float = math.nan
    mean_l_s2: float = math.nan
    fg_bg_cosine: float = math.nan
    cross_view_cosine: float = math.nan
    retries: int = 0
    degraded: int = 0


@dataclass
class PreparedBatch:
    triplets: list[ViewTriplet]
    plans: list[PointPlan]
    retries: int = 0
    degraded: int = 0


@dataclass
class PretrainResult:
    checkpoint: Checkpoint
    rows: list[dict] = field(default_factory=list)
    epochs: list[EpochStats] = field(default_factory=list)


def format_row(row: dict) -> str:
    return ",".join([str(row["step"])] + [f"{row[k]:.10g}" for k in ("lr", "l_sd", "l_s1", "l_s2", "total")])


def retrying_two_views(config: RunConfig) -> Callable[[np.ndarray, np.ndarray, np.random.Generator], TwoViews]:
    """Two-view generator that re-draws augmentations until the crop overlap holds both classes."""
    limit = config.train.retry_limit

    def two_views(img: np.ndarray, mask: np.ndarray, rng: np.random.Generator) -> TwoViews:
        for attempt in range(1, limit + 2):
            pair = generate_two_views(img, mask, rng, config.aug)
            pair.attempts = attempt
            bb = overlap(reverse_geom(pair.rec1), reverse_geom(pair.rec2))
            if bb is not None and len(classes_present(mask, bb)) == 2:
                return pair
            logger.debug("retry %d: overlap lacks a class", attempt)
        return pair

    return two_views


def plan_for(pair: ViewTriplet, mask: np.ndarray, n: int, ds: int, rng: np.random.Generator) -> PointPlan:
    bb = overlap(reverse_geom(pair.rec1), reverse_geom(pair.rec2))
    classes = classes_present(mask, bb) if bb is not None else ()
    if not classes:
        return PointPlan(view1={}, view2={}, view3=None, source=PointSet())
    return plan_points(pair.rec1, pair.rec2, mask, n, ds, rng, classes)


def prepare_batch(
    scenes: list[tuple[np.ndarray, np.ndarray]],
    batch_seed: int,
    config: RunConfig,
    workers: int = 1,
) -> PreparedBatch:
    images = [img for img, _ in scenes]
    masks = [mask for _, mask in scenes]
    pairs: list[TwoViews] = []
    redraw = retrying_two_views(config)

    def two_views(img, mask, rng):
        pair = redraw(img, mask, rng)
        pairs.append(pair)
        return pair

    triplets = generate_views_batch(
        images, masks, batch_seed, config.aug, two_view_fn=two_views, workers=workers, swap=config.train.use_bs
    )
    preset = get_preset(config.train.preset)
    plans = []
    degraded = 0
    for i, (triplet, mask) in enumerate(zip(triplets, masks)):
        plan = plan_for(triplet, mask, config.train.num_points, preset.ds, sample_rng(batch_seed, i, PLAN_STREAM))
        if len(plan.classes) < 2:
            degraded += 1
            logger.warning("sample %d of batch %d kept classes %s after retries", i, batch_seed, plan.classes)
        plans.append(plan)
    retries = sum(p.attempts - 1 for p in pairs)
    return PreparedBatch(triplets=triplets, plans=plans, retries=retries, degraded=degraded)


def batch_seed_for(seed: int, step: int) -> int:
    return int(np.random.SeedSequence([seed, step]).generate_state(1)[0])


def epoch_order(seed: int, epoch: int, count: int) -> np.ndarray:
    return np.random.default_rng([seed, epoch, 7]).permutation(count)


def init_params(config: RunConfig) -> Params:
    preset = get_preset(config.train.preset)
    params = init_pretrain_params(np.random.default_rng(config.train.seed), preset)
    return {k: v.astype(config.train.dtype) for k, v in params.items()}


def to_checkpoint(params: Params, stats: tuple[np.ndarray, np.ndarray], config: RunConfig, epoch: int) -> Checkpoint:
    tensors = {k: v.copy() for k, v in params.items()}
    tensors[INPUT_STATS[0]], tensors[INPUT_STATS[1]] = stats
    meta = CheckpointMeta(
        kind="pretrain", preset=config.train.preset, epoch=epoch, seed=config.train.seed, config_digest=config.digest()
    )
    return Checkpoint(tensors=tensors, meta=meta)


def loss_and_grads(
    params: Params, batch: PreparedBatch, config: RunConfig, stats: tuple[np.ndarray, np.ndarray]
) -> tuple[BatchLoss, dict[str, np.ndarray]]:
    tape = Tape(dtype=config.train.dtype)
    watched = tape.watch_all(params)
    loss = batch_loss(batch.triplets, batch.plans, watched, config.train, stats, ds=get_preset(config.train.preset).ds)
    grads = tape.backward(loss.total)
    return loss, {name: grads.wrt(t) for name, t in watched.items()}


def _monitor_cosines(params: Params, batch: PreparedBatch, config: RunConfig, stats) -> tuple[float, float]:
    tape = Tape(dtype=config.train.dtype)
    loss = batch_loss(batch.triplets, batch.plans, tape.watch_all(params), config.train, stats,
                      ds=get_preset(config.train.preset).ds)
    return loss.fg_bg_cosine, loss.cross_view_cosine


def pretrain(
    config: RunConfig,
    manifest: DatasetManifest,
    checkpoint_path: str | Path | None = None,
    on_row: Callable[[dict], None] | None = None,
    workers: int = 1,
    dump_dir: str | Path | None = None,
) -> PretrainResult:
    """Run pre-training on the train split and return the final checkpoint with the step log."""
    scenes = load_scenes(manifest, "train")
    if not scenes:
        raise DataError("train split is empty")
    train = config.train
    stats = channel_stats([img for img, _ in scenes])
    params = init_params(config)
    velocity = init_velocity(params)

    batch_size = min(train.batch_size, len(scenes))
    steps_per_epoch = math.ceil(len(scenes) / batch_size)
    total_steps = train.epochs * steps_per_epoch
    logger.info(
        "pretraining on %d scenes: %d epochs x %d steps, preset %s", len(scenes), train.epochs, steps_per_epoch,
        train.preset,
    )

    monitor_batch = prepare_batch(scenes[:batch_size], batch_seed_for(train.seed, MONITOR_STREAM), config, workers)
    fg_bg, cross = _monitor_cosines(params, monitor_batch, config, stats)
    result = PretrainResult(checkpoint=to_checkpoint(params, stats, config, 0))
    result.epochs.append(EpochStats(epoch=0, fg_bg_cosine=fg_bg, cross_view_cosine=cross))

    schedule = []
    for epoch in range(1, train.epochs + 1):
        order = epoch_order(train.seed, epoch, len(scenes))
        for b in range(steps_per_epoch):
            schedule.append((epoch, [scenes[i] for i in order[b * batch_size : (b + 1) * batch_size]]))

    def build(step: int) -> PreparedBatch:
        return prepare_batch(schedule[step][1], batch_seed_for(train.seed, step), config, workers)

    with ThreadPoolExecutor(max_workers=1) as prefetcher:
        pending: Future | None = prefetcher.submit(build, 0) if schedule else None
        epoch_rows: list[dict] = []
        retries = degraded = 0
        for step in range(total_steps):
            epoch = schedule[step][0]
            batch = pending.result()
            if step == 0 and dump_dir is not None:
                dump_triplets(batch.triplets, dump_dir)
            pending = prefetcher.submit(build, step + 1) if step + 1 < total_steps else None

            lr = poly_lr(step, total_steps, train.lr0, train.poly_power)
            loss, grads = loss_and_grads(params, batch, config, stats)
            sgd_step(params, grads, lr, train.momentum, train.weight_decay, velocity)
            row = {"step": step, "lr": lr, **loss.breakdown.model_dump()}
            result.rows.append(row)
            epoch_rows.append(row)
            retries += batch.retries
            degraded += batch.degraded
            if on_row is not None:
                on_row(row)
            logger.debug("step %d lr %.6f total %.6f", step, lr, loss.breakdown.total)

            if step + 1 == epoch * steps_per_epoch:
                fg_bg, cross = _monitor_cosines(params, monitor_batch, config, stats)
                stats_row = EpochStats(
                    epoch=epoch,
                    mean_total=float(np.mean([r["total"] for r in epoch_rows])),
                    mean_l_sd=float(np.mean([r["l_sd"] for r in epoch_rows])),
                    mean_l_s1=float(np.mean([r["l_s1"] for r in epoch_rows])),
                    mean_l_s2=float(np.mean([r["l_s2"] for r in epoch_rows])),
                    fg_bg_cosine=fg_bg,
                    cross_view_cosine=cross,
                    retries=retries,
                    degraded=degraded,
                )
                result.epochs.append(stats_row)
                logger.info(
                    "epoch %d: total %.4f (sd %.4f s1 %.4f s2 %.4f) fg/bg cos %.4f cross-view cos %.4f",
                    epoch, stats_row.mean_total, stats_row.mean_l_sd, stats_row.mean_l_s1, stats_row.mean_l_s2,
                    fg_bg, cross,
                )
                if degraded:
                    logger.warning("epoch %d: %d sample(s) trained with a missing class", epoch, degraded)
                result.checkpoint = to_checkpoint(params, stats, config, epoch)
                if checkpoint_path is not None:
                    save_checkpoint(result.checkpoint, checkpoint_path)
                epoch_rows, retries, degraded = [], 0, 0

    if checkpoint_path is not None and train.epochs == 0:
        save_checkpoint(result.checkpoint, checkpoint_path)
    return result


def write_loss_log(rows: list[dict], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join([CSV_HEADER] + [format_row(r) for r in rows]) + "\n", encoding="utf-8")
    return path
