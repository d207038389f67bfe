import argparse
import logging
import sys
from typing import Optional, Sequence

from fracvqa.commands import COMMANDS
from fracvqa.core.config import settings
from fracvqa.core.errors import FracVQAError
from fracvqa.core.log import setup_logging

logger = logging.getLogger("fracvqa")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fracvqa",
        description="Solver variacional para EDPs fracionárias no tempo (Caputo)",
    )
    parser.add_argument("--log-level", default=None, help=f"default: LOG_LEVEL ({settings.LOG_LEVEL})")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        command.register(subparsers)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level)
    try:
        return args.handler(args)
    except FracVQAError as exc:
        logger.error("[ERRO] %s: %s", type(exc).__name__, exc)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
