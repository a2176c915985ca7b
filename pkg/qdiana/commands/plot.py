import argparse
from pathlib import Path

from qdiana.services.plotting import Series, write_svg
from qdiana.services.traces import read_csv

NAME = "plot"
HELP = "render f_gap and dist_sq of trace CSVs against iterations and uplink bits as SVG"


def configure(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("traces", nargs="+", help="trace CSV files")
    parser.add_argument("--output", "-o", default="plot.svg", help="SVG path (default: plot.svg)")


def handle(args: argparse.Namespace) -> int:
    series = [Series(Path(path).stem, read_csv(path)) for path in args.traces]
    print(write_svg(series, args.output))
    return 0
