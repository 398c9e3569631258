import argparse
import logging
from pathlib import Path

import numpy as np

from commands.common import add_registry_flag, open_recorder, parse_bool, require, run_config
from config import SynthConfig, write_config_echo
from imaging.manifest import MANIFEST_NAME, build_manifest, write_manifest
from imaging.netpbm import write_pgm, write_ppm
from imaging.synth import synth_cd_pair, synth_scene

logger = logging.getLogger(__name__)


def _fractions(text: str) -> tuple[float, float, float]:
    try:
        parts = tuple(float(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected train,val,test fractions, got {text!r}") from None
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected three fractions, got {text!r}")
    return parts


def register(subparsers) -> None:
    p = subparsers.add_parser("synth", help="write synthetic scenes or change-detection pairs plus a manifest")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--num", required=True, type=int)
    p.add_argument("--size", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cd-pairs", type=parse_bool, nargs="?", const=True, default=False)
    p.add_argument("--split", type=_fractions, default=None, help="train,val,test fractions")
    p.add_argument("--config", type=Path, default=None)
    add_registry_flag(p)
    p.set_defaults(func=run)


def write_scenes(out: Path, num: int, seed: int, cfg: SynthConfig) -> None:
    for i in range(num):
        img, mask = synth_scene(np.random.default_rng([seed, i]), cfg)
        write_ppm(img, out / f"scene_{i:05d}.ppm")
        write_pgm(mask, out / f"scene_{i:05d}.pgm")


def write_cd_pairs(out: Path, num: int, seed: int, cfg: SynthConfig) -> None:
    for i in range(num):
        pair = synth_cd_pair(np.random.default_rng([seed, i]), cfg)
        write_ppm(pair.image_t1, out / f"cd_{i:05d}_t1.ppm")
        write_ppm(pair.image_t2, out / f"cd_{i:05d}_t2.ppm")
        write_pgm(pair.change_mask, out / f"cd_{i:05d}_change.pgm")


def run(args: argparse.Namespace) -> int:
    require(args.num >= 1, "--num must be at least 1")
    config = run_config(args, size=args.size)
    fractions = args.split or ((0.6, 0.2, 0.2) if args.cd_pairs else (0.8, 0.2, 0.0))
    args.out.mkdir(parents=True, exist_ok=True)
    with open_recorder(args, "synth", config, args.seed, args.out):
        if args.cd_pairs:
            write_cd_pairs(args.out, args.num, args.seed, config.synth)
        else:
            write_scenes(args.out, args.num, args.seed, config.synth)
        manifest = build_manifest(args.out, fractions, args.seed)
        path = write_manifest(manifest, args.out / MANIFEST_NAME)
        write_config_echo(config, path)

    kind = "change pairs" if args.cd_pairs else "scenes"
    counts = " ".join(f"{split}={len(manifest.split(split))}" for split in ("train", "val", "test"))
    print(f"{args.num} {kind} written to {args.out} ({counts})")
    return 0
