import argparse
from pathlib import Path

from config import RunConfig, load_run_config
from db import registry_url
from errors import ConfigError
from registry import RunRecorder


def parse_bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def parse_point(text: str) -> tuple[int, int]:
    try:
        r, c = (int(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected r,c, got {text!r}") from None
    return r, c


def add_registry_flag(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--no-registry", action="store_true", help="do not record this run in the run registry")
    parser.add_argument("--db-url", default=None,
                        help="registry database url (default: SADL_DB_URL, else sadl_runs.db beside the outputs)")


def open_recorder(
    args: argparse.Namespace, command: str, config: RunConfig | None, seed: int | None, out_dir: Path | None
) -> RunRecorder:
    if args.no_registry:
        return RunRecorder(command, enabled=False)
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    return RunRecorder(command, config, seed, url=registry_url(out_dir, args.db_url))


def run_config(args: argparse.Namespace, **overrides) -> RunConfig:
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return load_run_config(getattr(args, "config", None), overrides)


def require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)
