import argparse
import logging
import sys

from qdiana.exceptions import DivergenceError
from qdiana.models.run_config import load_run_config
from qdiana.services.engine import run_experiment
from qdiana.services.traces import write_csv, write_csv_stream

NAME = "run"
HELP = "run one experiment and write its trace CSV"

logger = logging.getLogger("Run")


def configure(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("config", help="experiment config (JSON)")
    parser.add_argument("--output", "-o", help="trace CSV path; overrides output.path, stdout when neither is set")
    parser.add_argument("--binary", help="also write the binary trace here")


def handle(args: argparse.Namespace) -> int:
    config = load_run_config(args.config)
    updates = {}
    if args.output:
        updates["path"] = args.output
    if args.binary:
        updates["binary_path"] = args.binary
    if updates:
        config = config.model_copy(update={"output": config.output.model_copy(update=updates)})

    try:
        trace = run_experiment(config)
    except DivergenceError as exc:
        if exc.trace is not None and config.output.path:
            write_csv(exc.trace, config.output.path)
            logger.warning(f"Partial trace up to the divergence written to {config.output.path}")
        raise

    if not config.output.path:
        write_csv_stream(trace, sys.stdout)
    else:
        print(config.output.path)
    return 0
