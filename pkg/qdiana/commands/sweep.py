import argparse

from qdiana.models.run_config import load_sweep_config
from qdiana.services.sweep import run_sweep

NAME = "sweep"
HELP = "run a grid of experiments over alpha, gamma, block_size and s"


def configure(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("config", help="sweep config (JSON) with 'base' and 'grid'")
    parser.add_argument("--output-dir", help="directory for per-cell traces and summary.csv")
    parser.add_argument("--jobs", "-j", type=int, default=1, help="cells run in parallel threads")


def handle(args: argparse.Namespace) -> int:
    sweep = load_sweep_config(args.config)
    print(run_sweep(sweep, args.output_dir, args.jobs))
    return 0
