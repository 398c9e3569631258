import argparse
import logging
from pathlib import Path

from commands.common import add_registry_flag, open_recorder, run_config
from config import write_config_echo
from errors import DataError
from imaging.manifest import load_cd_pairs, read_manifest
from training.checkpoint import load_checkpoint
from training.finetune import evaluate, load_cd_model

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    p = subparsers.add_parser("eval", help="print precision recall f1 iou of a change-detection checkpoint")
    p.add_argument("--model", required=True, type=Path)
    p.add_argument("--data", required=True, type=Path)
    p.add_argument("--split", choices=("train", "val", "test"), default=None,
                   help="defaults to test, or val when there is no test split")
    p.add_argument("--config", type=Path, default=None)
    p.add_argument("--out", type=Path, default=None, help="report file (default: <model>.eval.txt)")
    add_registry_flag(p)
    p.set_defaults(func=run)


def run(args: argparse.Namespace) -> int:
    config = run_config(args)
    model = load_cd_model(load_checkpoint(args.model))
    manifest = read_manifest(args.data)
    split = args.split or ("test" if manifest.split("test") else "val")
    records = manifest.split(split)
    if not records:
        raise DataError(f"split {split!r} is empty")
    out = args.out or args.model.with_name(args.model.name + ".eval.txt")
    write_config_echo(config, out)
    with open_recorder(args, "eval", config, None, out.parent) as recorder:
        metrics = evaluate(model, load_cd_pairs(manifest, records))
        recorder.eval({"epoch": 0, "split": split, **metrics.row()})
    line = f"{metrics.precision:.4f} {metrics.recall:.4f} {metrics.f1:.4f} {metrics.iou:.4f}"
    out.write_text(f"{split} {line}\n", encoding="utf-8")
    logger.info("%s split of %s: %s", split, args.data, line)
    print(line)
    return 0
