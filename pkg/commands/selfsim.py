import argparse
import logging
from pathlib import Path

import numpy as np

from autograd.tensor import constant
from commands.common import add_registry_flag, open_recorder, parse_point, run_config
from config import get_preset, write_config_echo
from errors import CheckpointError, ConfigError, ShapeError
from imaging.netpbm import read_pgm, read_ppm
from pretext.network import ENCODER_PREFIX, INPUT_STATS, encoder_forward, stack_images
from pretext.sampling import downscale_mask
from training.checkpoint import load_checkpoint
from training.selfsim import self_similarity_map, write_similarity_pgm

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    p = subparsers.add_parser("selfsim", help="write the self-similarity map of one query point as a PGM")
    p.add_argument("--model", required=True, type=Path)
    p.add_argument("--image", required=True, type=Path)
    p.add_argument("--mask", type=Path, default=None)
    p.add_argument("--point", type=parse_point, default=None, help="query pixel r,c in image coordinates")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--config", type=Path, default=None)
    add_registry_flag(p)
    p.set_defaults(func=run)


def run(args: argparse.Namespace) -> int:
    config = run_config(args)
    ckpt = load_checkpoint(args.model)
    try:
        ds = get_preset(ckpt.meta.preset).ds
    except ConfigError as e:
        raise CheckpointError(f"{args.model}: {e.detail}") from None
    img = read_ppm(args.image)
    mask = read_pgm(args.mask) if args.mask else None
    if mask is not None and mask.shape != img.shape[:2]:
        raise ShapeError(f"mask {mask.shape} does not match image {img.shape[:2]}")

    point = args.point
    if point is None:
        if mask is None or not mask.any():
            raise ShapeError("--point is required when no mask with foreground is given")
        rows, cols = np.nonzero(mask)
        point = (int(np.median(rows)), int(np.median(cols)))

    stats = None
    if all(k in ckpt.tensors for k in INPUT_STATS):
        stats = (ckpt.tensors[INPUT_STATS[0]], ckpt.tensors[INPUT_STATS[1]])
    params = {k: constant(v.astype(np.float64)) for k, v in ckpt.subset(ENCODER_PREFIX).items()}
    with open_recorder(args, "selfsim", config, None, args.out.parent):
        features = encoder_forward(constant(stack_images([img], stats)), params).data[0]
        if not (0 <= point[0] < img.shape[0] and 0 <= point[1] < img.shape[1]):
            raise ShapeError(f"point {point} lies outside the {img.shape[0]}x{img.shape[1]} image")
        sm = self_similarity_map(features, (point[0] // ds, point[1] // ds))
        write_similarity_pgm(sm, args.out)
        write_config_echo(config, args.out)

    if mask is not None:
        fg_mass = float(sm[downscale_mask(mask, ds) == 1].sum())
        print(f"foreground mass {fg_mass:.4f}")
    logger.info("self-similarity map %dx%d written to %s", sm.shape[0], sm.shape[1], args.out)
    return 0
