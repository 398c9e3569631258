"""Downstream Siamese change detection: model assembly, fine-tuning and evaluation."""
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from autograd.tensor import Tape, constant, cross_entropy_2class
from config import ModelPreset, RunConfig, get_preset
from errors import CheckpointError, DataError
from imaging.augment import blur_radius
from imaging.compositing import gaussian_blur
from imaging.manifest import DatasetManifest, load_cd_pairs, subsample
from imaging.synth import CDPair
from pretext.network import (
    ENCODER_PREFIX,
    INPUT_STATS,
    Params,
    cd_forward,
    channel_stats,
    init_cd_head,
    init_encoder,
    stack_images,
)
from training.checkpoint import Checkpoint, CheckpointMeta, save_checkpoint
from training.metrics import CDMetrics, cd_metrics
from training.optim import init_velocity, linear_lr, sgd_step

logger = logging.getLogger(__name__)

CSV_HEADER = "epoch,split,precision,recall,f1,iou"

Stats = tuple[np.ndarray, np.ndarray]


@dataclass
class CDModel:
    params: Params
    stats: Stats | None
    preset: ModelPreset


@dataclass
class FinetuneResult:
    checkpoint: Checkpoint
    rows: list[dict] = field(default_factory=list)
    best_epoch: int = 0
    best: CDMetrics = field(default_factory=CDMetrics)


def build_cd_model(init: Checkpoint | None, preset: ModelPreset, seed: int = 0, head_std: float = 0.02) -> CDModel:
    """Shared encoder from `init` (or random) plus a freshly drawn change head."""
    reference = init_encoder(np.random.default_rng([seed, 0]), preset)
    stats = None
    if init is None:
        encoder = reference
    else:
        if init.meta.preset != preset.name:
            raise CheckpointError(f"checkpoint preset {init.meta.preset!r} does not match {preset.name!r}")
        encoder = {k: v.astype(np.float64) for k, v in init.subset(ENCODER_PREFIX).items()}
        missing = sorted(set(reference) - set(encoder))
        if missing:
            raise CheckpointError(f"checkpoint lacks encoder tensors: {', '.join(missing[:3])}")
        for name, value in reference.items():
            if encoder[name].shape != value.shape:
                raise CheckpointError(f"{name}: shape {encoder[name].shape} does not match preset {value.shape}")
        if all(k in init.tensors for k in INPUT_STATS):
            stats = (init.tensors[INPUT_STATS[0]].astype(np.float64), init.tensors[INPUT_STATS[1]].astype(np.float64))
    params = dict(encoder)
    params.update(init_cd_head(np.random.default_rng([seed, 1]), preset, head_std))
    return CDModel(params=params, stats=stats, preset=preset)


def augment_pair(pair: CDPair, rng: np.random.Generator, blur_prob: float, sigma_range: tuple[float, float]) -> CDPair:
    """Joint random flips of both epochs and the mask, then independent blur per epoch."""
    img1, img2, mask = pair.image_t1, pair.image_t2, pair.change_mask
    if rng.random() < 0.5:
        img1, img2, mask = img1[:, ::-1], img2[:, ::-1], mask[:, ::-1]
    if rng.random() < 0.5:
        img1, img2, mask = img1[::-1], img2[::-1], mask[::-1]
    blurred = []
    for img in (img1, img2):
        if rng.random() < blur_prob:
            sigma = float(rng.uniform(*sigma_range))
            img = gaussian_blur(img, sigma, blur_radius(sigma))
        blurred.append(np.ascontiguousarray(img))
    return CDPair(image_t1=blurred[0], image_t2=blurred[1], change_mask=np.ascontiguousarray(mask))


def _forward(model: CDModel, params, pairs: list[CDPair], dtype=np.float64):
    img1 = constant(stack_images([p.image_t1 for p in pairs], model.stats), dtype)
    img2 = constant(stack_images([p.image_t2 for p in pairs], model.stats), dtype)
    return cd_forward(img1, img2, params, model.preset.ds)


def predict(model: CDModel, pairs: list[CDPair]) -> np.ndarray:
    """B×H×W change masks (argmax over the two logits, ties to unchanged)."""
    logits = _forward(model, {k: constant(v) for k, v in model.params.items()}, pairs).data
    return (logits[:, 1] > logits[:, 0]).astype(np.uint8)


def evaluate(model: CDModel, pairs: list[CDPair], batch_size: int = 4) -> CDMetrics:
    total = CDMetrics()
    for start in range(0, len(pairs), batch_size):
        chunk = pairs[start : start + batch_size]
        for pred, pair in zip(predict(model, chunk), chunk):
            total = total + cd_metrics(pred, pair.change_mask)
    return total


def cd_loss(model: CDModel, params, pairs: list[CDPair]):
    logits = _forward(model, params, pairs)
    return cross_entropy_2class(logits, np.stack([p.change_mask for p in pairs]))


def to_checkpoint(model: CDModel, config: RunConfig, epoch: int, metrics: CDMetrics) -> Checkpoint:
    tensors = {k: v.copy() for k, v in model.params.items()}
    if model.stats is not None:
        tensors[INPUT_STATS[0]], tensors[INPUT_STATS[1]] = model.stats
    meta = CheckpointMeta(
        kind="cd",
        preset=model.preset.name,
        epoch=epoch,
        seed=config.train.seed,
        config_digest=config.digest(),
        extra={"val_f1": metrics.f1, "val_mean_f1": metrics.mean_f1},
    )
    return Checkpoint(tensors=tensors, meta=meta)


def load_cd_model(ckpt: Checkpoint) -> CDModel:
    if ckpt.meta.kind != "cd":
        raise CheckpointError(f"expected a change-detection checkpoint, got kind {ckpt.meta.kind!r}")
    stats = None
    if all(k in ckpt.tensors for k in INPUT_STATS):
        stats = (ckpt.tensors[INPUT_STATS[0]].astype(np.float64), ckpt.tensors[INPUT_STATS[1]].astype(np.float64))
    params = {k: v.astype(np.float64) for k, v in ckpt.tensors.items() if k not in INPUT_STATS}
    return CDModel(params=params, stats=stats, preset=get_preset(ckpt.meta.preset))


def _metrics_row(epoch: int, split: str, metrics: CDMetrics) -> dict:
    return {"epoch": epoch, "split": split, **metrics.row()}


def finetune_cd(
    config: RunConfig,
    manifest: DatasetManifest,
    init: Checkpoint | None,
    frac: float = 1.0,
    checkpoint_path: str | Path | None = None,
    on_row: Callable[[dict], None] | None = None,
) -> FinetuneResult:
    """Fine-tune on `frac` of the train split; keep the checkpoint with the best val change-F1."""
    ft, seed = config.finetune, config.train.seed
    train_pairs = load_cd_pairs(manifest, subsample(manifest.split("train"), frac, seed))
    if not train_pairs:
        raise DataError("train split is empty")
    val_pairs = load_cd_pairs(manifest, manifest.split("val"))
    val_split = "val"
    if not val_pairs:
        logger.warning("no val split; selecting the checkpoint on train metrics")
        val_pairs, val_split = train_pairs, "train"

    model = build_cd_model(init, get_preset(config.train.preset), seed, ft.ft_head_std)
    if model.stats is None:
        model.stats = channel_stats([p.image_t1 for p in train_pairs] + [p.image_t2 for p in train_pairs])
    logger.info(
        "fine-tuning on %d pairs (%s init), validating on %d", len(train_pairs),
        "random" if init is None else "pretrained", len(val_pairs),
    )

    metrics = evaluate(model, val_pairs, ft.ft_batch_size)
    result = FinetuneResult(checkpoint=to_checkpoint(model, config, 0, metrics), best=metrics)
    if ft.ft_epochs == 0:
        row = _metrics_row(0, val_split, metrics)
        result.rows.append(row)
        if on_row is not None:
            on_row(row)

    velocity = init_velocity(model.params)
    steps_per_epoch = math.ceil(len(train_pairs) / ft.ft_batch_size)
    total_steps = ft.ft_epochs * steps_per_epoch
    sigma_range = (config.aug.blur_sigma_min, config.aug.blur_sigma_max)
    step = 0
    best_f1 = -1.0
    for epoch in range(1, ft.ft_epochs + 1):
        rng = np.random.default_rng([seed, epoch, 11])
        order = rng.permutation(len(train_pairs))
        losses = []
        for b in range(steps_per_epoch):
            batch = [augment_pair(train_pairs[i], rng, ft.ft_blur_prob, sigma_range)
                     for i in order[b * ft.ft_batch_size : (b + 1) * ft.ft_batch_size]]
            tape = Tape()
            watched = tape.watch_all(model.params)
            loss = cd_loss(model, watched, batch)
            grads = tape.backward(loss)
            lr = linear_lr(step, total_steps, ft.ft_lr0)
            sgd_step(model.params, {k: grads.wrt(t) for k, t in watched.items()}, lr, ft.ft_momentum,
                     ft.ft_weight_decay, velocity)
            losses.append(loss.item())
            step += 1

        metrics = evaluate(model, val_pairs, ft.ft_batch_size)
        row = _metrics_row(epoch, val_split, metrics)
        result.rows.append(row)
        if on_row is not None:
            on_row(row)
        logger.info(
            "epoch %d: loss %.4f %s f1 %.4f (mean f1 %.4f) iou %.4f",
            epoch, float(np.mean(losses)), val_split, metrics.f1, metrics.mean_f1, metrics.iou,
        )
        if metrics.f1 > best_f1:
            best_f1 = metrics.f1
            result.checkpoint = to_checkpoint(model, config, epoch, metrics)
            result.best_epoch, result.best = epoch, metrics

    if checkpoint_path is not None:
        save_checkpoint(result.checkpoint, checkpoint_path)
    return result


def write_metrics_log(rows: list[dict], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [CSV_HEADER]
    for r in rows:
        lines.append(f"{r['epoch']},{r['split']},{r['precision']:.6f},{r['recall']:.6f},{r['f1']:.6f},{r['iou']:.6f}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
