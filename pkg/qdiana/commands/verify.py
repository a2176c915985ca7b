import argparse
import logging
import time

from qdiana.exceptions import InvalidInputError
from qdiana.verify import VerifyProfile, get_all_suites

NAME = "verify"
HELP = "run the quantizer and convergence property suites, printing PASS/FAIL per property"

logger = logging.getLogger("Verify")


def configure(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--quick", action="store_true", help="smaller Monte-Carlo and seed counts")
    parser.add_argument("--suite", action="append", help="run only this suite (repeatable)")


def handle(args: argparse.Namespace) -> int:
    profile = VerifyProfile.from_settings(args.quick)
    suites = get_all_suites(args.suite)
    if not suites:
        raise InvalidInputError(f"no verification suite named {', '.join(args.suite or [])}")

    failed = []
    for suite in suites:
        started = time.perf_counter()
        logger.info(f"Running suite {suite.NAME}")
        for result in suite.run(profile):
            print(result.line(), flush=True)
            if not result.passed:
                failed.append(f"{suite.NAME}: {result.name}")
        logger.info(f"Suite {suite.NAME} finished in {time.perf_counter() - started:.1f}s")

    if failed:
        print(f"{len(failed)} propert{'y' if len(failed) == 1 else 'ies'} failed:")
        for name in failed:
            print(f"  {name}")
        return 1
    return 0
