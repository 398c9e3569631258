import argparse
import logging
from pathlib import Path

from commands.common import add_registry_flag, open_recorder, require, run_config
from config import write_config_echo
from imaging.manifest import read_manifest
from training.checkpoint import load_checkpoint
from training.finetune import finetune_cd, write_metrics_log

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    p = subparsers.add_parser("finetune", help="fine-tune the Siamese change-detection model")
    p.add_argument("--data", required=True, type=Path)
    p.add_argument("--init", required=True, help="pre-trained checkpoint path, or 'random'")
    p.add_argument("--frac", type=float, default=1.0, help="fraction of the train split, in (0, 1]")
    p.add_argument("--config", type=Path, default=None)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--log", required=True, type=Path)
    add_registry_flag(p)
    p.set_defaults(func=run)


def run(args: argparse.Namespace) -> int:
    require(0 < args.frac <= 1, f"--frac must lie in (0, 1], got {args.frac}")
    config = run_config(args)
    init = None if args.init == "random" else load_checkpoint(args.init)
    manifest = read_manifest(args.data)
    write_config_echo(config, args.out)
    with open_recorder(args, "finetune", config, config.train.seed, args.out.parent) as recorder:
        result = finetune_cd(config, manifest, init, args.frac, checkpoint_path=args.out, on_row=recorder.eval)
        write_metrics_log(result.rows, args.log)
    logger.info("best epoch %d: change f1 %.4f", result.best_epoch, result.best.f1)
    return 0
