import argparse
import logging
import os
import sys

from dotenv import load_dotenv

from commands import evaluate, finetune, gradcheck, pretrain, selfsim, synth
from errors import ConfigError, SadlError

load_dotenv()

logger = logging.getLogger("sadl")


class CommandParser(argparse.ArgumentParser):
    """argparse parser whose usage errors surface as ConfigError (exit code 1)."""

    def error(self, message: str):
        raise ConfigError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = CommandParser(prog="sadl", description="Semantic-aware dense pre-training at desk scale.")
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=CommandParser)

    synth.register(subparsers)
    pretrain.register(subparsers)
    finetune.register(subparsers)
    evaluate.register(subparsers)
    selfsim.register(subparsers)
    gradcheck.register(subparsers)
    return parser


def configure_logging() -> None:
    level = os.getenv("SADL_LOG_LEVEL", "INFO").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def main(argv: list[str] | None = None) -> int:
    configure_logging()
    try:
        args = build_parser().parse_args(argv)
        return args.func(args) or 0
    except SadlError as e:
        print(f"error: {e.detail}", file=sys.stderr)
        return e.exit_code
    except Exception:
        logger.exception("unexpected failure")
        return 2


if __name__ == "__main__":
    sys.exit(main())
