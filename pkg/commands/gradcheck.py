import argparse
from pathlib import Path

from commands.common import add_registry_flag, open_recorder, run_config
from config import write_config_echo
from errors import GradientError
from training.fidelity import cd_gradcheck, pretrain_gradcheck


def register(subparsers) -> None:
    p = subparsers.add_parser("gradcheck", help="compare analytic and finite-difference gradients of the loss")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", type=Path, default=None)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--target", choices=("pretrain", "cd"), default="pretrain")
    p.add_argument("--out", type=Path, default=None, help="also write the report here, with its config echo")
    add_registry_flag(p)
    p.set_defaults(func=run)


def run(args: argparse.Namespace) -> int:
    config = run_config(args)
    check = pretrain_gradcheck if args.target == "pretrain" else cd_gradcheck
    if args.out is not None:
        write_config_echo(config, args.out)
    out_dir = args.out.parent if args.out is not None else None
    with open_recorder(args, "gradcheck", config, args.seed, out_dir):
        report = check(args.seed, config, samples=args.samples)
    line = (
        f"max_rel_err {report.max_rel_err:.3e} mean_rel_err {report.mean_rel_err:.3e} "
        f"within_tol {report.within_tol:.3f} checked {report.checked} skipped {report.skipped}"
    )
    print(line)
    if args.out is not None:
        args.out.write_text(f"{args.target} seed {args.seed} {line}\n", encoding="utf-8")
    if not report.passed:
        raise GradientError(
            f"{report.within_tol:.1%} of checked coordinates within {report.tol:g}, need {report.min_fraction:.0%}"
        )
    return 0
