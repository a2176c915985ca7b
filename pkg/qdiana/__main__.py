import argparse
import sys
from typing import List, Optional

from pydantic import ValidationError

from config import settings
from qdiana.commands import get_all_commands
from qdiana.exceptions import QDianaError
from qdiana.lifespan import get_all_shutdown_tasks, get_all_startup_tasks
from qdiana.models.base import config_error_from
from qdiana.utils.enums import LogLevel


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qdiana",
        description="Quantized distributed optimization on a simulated parameter server",
    )
    parser.add_argument(
        "--log-level",
        choices=[level.value for level in LogLevel],
        type=str.upper,
        help="overrides QDIANA_LOG_LEVEL",
    )
    subparsers = parser.add_subparsers(dest="command", metavar="command")

    for command in get_all_commands():
        subparser = subparsers.add_parser(command.NAME, help=command.HELP, description=command.HELP)
        command.configure(subparser)
        subparser.set_defaults(handler=command.handle)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2

    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    if args.log_level:
        settings.runtime.log_level = LogLevel(args.log_level)

    # Run all startup tasks
    for startup_task in get_all_startup_tasks():
        startup_task()

    try:
        return args.handler(args)
    except QDianaError as exc:
        print(f"error: {exc.detail}", file=sys.stderr)
        return exc.exit_code
    except ValidationError as exc:
        error = config_error_from(exc)
        print(f"error: {error.detail}", file=sys.stderr)
        return error.exit_code
    finally:
        # Run all shutdown tasks
        for shutdown_task in get_all_shutdown_tasks():
            shutdown_task()


if __name__ == "__main__":
    sys.exit(main())
