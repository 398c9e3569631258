import argparse
import logging
from pathlib import Path

from commands.common import add_registry_flag, open_recorder, run_config
from config import write_config_echo
from deps import worker_count
from imaging.manifest import read_manifest
from training.pretrain import pretrain, write_loss_log

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    p = subparsers.add_parser("pretrain", help="semantic-aware dense pre-training on a scene manifest")
    p.add_argument("--data", required=True, type=Path)
    p.add_argument("--config", type=Path, default=None)
    p.add_argument("--out", required=True, type=Path, help="checkpoint path")
    p.add_argument("--log", required=True, type=Path, help="per-step CSV loss log")
    p.add_argument("--dump-views", type=Path, default=None, help="write the first batch's views here")
    add_registry_flag(p)
    p.set_defaults(func=run)


def run(args: argparse.Namespace) -> int:
    config = run_config(args)
    manifest = read_manifest(args.data)
    write_config_echo(config, args.out)
    with open_recorder(args, "pretrain", config, config.train.seed, args.out.parent) as recorder:
        result = pretrain(
            config,
            manifest,
            checkpoint_path=args.out,
            on_row=recorder.step,
            workers=worker_count(),
            dump_dir=args.dump_views,
        )
        write_loss_log(result.rows, args.log)
    logger.info("wrote %s and %d log rows to %s", args.out, len(result.rows), args.log)
    return 0
